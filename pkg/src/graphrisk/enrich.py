"""CPE generation and vulnerability enrichment from NVD and EPSS, live or replayed."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import os
import re
import time
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import requests

from graphrisk.errors import ConfigurationError, EnrichmentError, FetchError, MissingFixtureError, ValidationError
from graphrisk.model import AttackVector, ComponentNode, Part, VulnerabilityRecord

log = logging.getLogger(__name__)

NVD_URL = "https://services.nvd.nist.gov/rest/json/cves/2.0"
EPSS_URL = "https://api.first.org/data/v1/epss"
API_KEY_ENV = "NVD_API_KEY"
NVD_PAGE_SIZE = 2000
EPSS_BATCH = 100

# characters that stay unescaped in a CPE 2.3 formatted-string attribute
_CPE_PLAIN = re.compile(r"[a-z0-9_.\-]")


def _cpe_attribute(value: str) -> str:
    value = value.strip().lower()
    if value in ("*", "-"):
        return value
    value = re.sub(r"\s+", "_", value)
    return "".join(ch if _CPE_PLAIN.fullmatch(ch) else "\\" + ch for ch in value)


@dataclass(frozen=True)
class CpeId:
    part: str
    vendor: str
    product: str
    version: str

    def __str__(self) -> str:
        return f"cpe:2.3:{self.part}:{self.vendor}:{self.product}:{self.version}"

    @property
    def full(self) -> str:
        """All thirteen CPE 2.3 positions, trailing ones wildcarded."""
        return str(self) + ":*" * 7


def generate_cpe(component: ComponentNode) -> CpeId:
    for name in ("vendor", "product", "version"):
        if not str(getattr(component, name) or "").strip():
            raise ValidationError(f"component {component.id!r}: cannot build a CPE without {name}")
    part = component.part if isinstance(component.part, Part) else Part(component.part)
    return CpeId(
        part.cpe_code,
        _cpe_attribute(component.vendor),
        _cpe_attribute(component.product),
        _cpe_attribute(component.version),
    )


# ---------------------------------------------------------------------------
# transport


def request_key(url: str, params: Mapping[str, Any]) -> str:
    canonical = json.dumps({"url": url, "params": {k: str(v) for k, v in sorted(params.items())}}, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass
class FixtureStore:
    """Recorded responses, one JSON file per request named by its hash."""

    directory: Path

    def path(self, url: str, params: Mapping[str, Any]) -> Path:
        return Path(self.directory) / f"{request_key(url, params)}.json"

    def load(self, url: str, params: Mapping[str, Any]) -> tuple[Any, str]:
        p = self.path(url, params)
        if not p.exists():
            raise MissingFixtureError(f"no recorded response for {url} {dict(params)} (expected {p.name})")
        try:
            doc = json.loads(p.read_text())
            return doc["response"], doc["fetched_at"]
        except (ValueError, KeyError) as exc:
            raise EnrichmentError(f"unparseable fixture {p}: {exc}") from None

    def save(self, url: str, params: Mapping[str, Any], response: Any, fetched_at: str) -> Path:
        p = self.path(url, params)
        p.parent.mkdir(parents=True, exist_ok=True)
        doc = {"request": {"url": url, "params": {k: str(v) for k, v in sorted(params.items())}},
               "fetched_at": fetched_at, "response": response}
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return p


@dataclass
class EnrichConfig:
    mode: str = "fixture"
    fixture_dir: Path | None = None
    api_key: str | None = None
    record: bool = False
    # NVD allows 50 requests per rolling 30 s with a key
    max_requests: int = 50
    window_seconds: float = 30.0
    retries: int = 4
    backoff_seconds: float = 2.0
    timeout: float = 30.0

    def __post_init__(self):
        if self.mode not in ("fixture", "live"):
            raise ConfigurationError(f"unknown enrichment mode {self.mode!r}")
        if self.api_key is None:
            self.api_key = os.environ.get(API_KEY_ENV) or None


class Client:
    """JSON GETs with replay, rate limiting and retry."""

    def __init__(self, config: EnrichConfig, session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep, clock: Callable[[], float] = time.monotonic):
        self.config = config
        self.store = FixtureStore(Path(config.fixture_dir)) if config.fixture_dir else None
        if config.mode == "fixture" and self.store is None:
            raise ConfigurationError("fixture mode needs a fixture directory")
        self._session = session
        self._sleep = sleep
        self._clock = clock
        self._sent: list[float] = []
        self.requests_sent = 0

    @property
    def session(self) -> requests.Session:
        if self._session is None:
            self._session = requests.Session()
        return self._session

    def _throttle(self) -> None:
        cfg = self.config
        now = self._clock()
        self._sent = [t for t in self._sent if now - t < cfg.window_seconds]
        if len(self._sent) >= cfg.max_requests:
            self._sleep(cfg.window_seconds - (now - self._sent[0]))
        self._sent.append(self._clock())

    def get_json(self, url: str, params: Mapping[str, Any], *, needs_key: bool = False) -> tuple[Any, str]:
        """Returns the decoded body and the fetch timestamp."""
        cfg = self.config
        if cfg.mode == "fixture":
            return self.store.load(url, params)
        if needs_key and not cfg.api_key:
            raise ConfigurationError(f"live NVD access needs an API key in ${API_KEY_ENV}")
        headers = {"apiKey": cfg.api_key} if needs_key else {}
        last: Exception | None = None
        for attempt in range(cfg.retries + 1):
            if attempt:
                self._sleep(cfg.backoff_seconds * 2 ** (attempt - 1))
            self._throttle()
            self.requests_sent += 1
            try:
                resp = self.session.get(url, params=dict(params), headers=headers, timeout=cfg.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = exc
                log.warning("request to %s failed (%s), attempt %d", url, exc, attempt + 1)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = FetchError(f"{url} answered {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise EnrichmentError(f"{url} answered {resp.status_code}")
            try:
                body = resp.json()
            except ValueError:
                raise EnrichmentError(f"unparseable response from {url}") from None
            fetched_at = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
            if cfg.record and self.store is not None:
                self.store.save(url, params, body, fetched_at)
            return body, fetched_at
        raise FetchError(f"giving up on {url} after {cfg.retries + 1} attempts: {last}")


# ---------------------------------------------------------------------------
# NVD


@dataclass(frozen=True)
class EnrichmentRecord:
    cve_id: str
    cvss_vector: str
    cvss_base: float
    likelihood_subscore: float
    impact_subscore: float
    attack_vector: str
    scope_change: bool
    epss: float = 0.0
    exploit_exists: bool = False
    ransomware: bool = False
    source: str = "fixture"
    fetched_at: str = ""

    def to_vulnerability(self, component_ref: str = "") -> VulnerabilityRecord:
        return VulnerabilityRecord(
            cve_id=self.cve_id,
            cvss_base=self.cvss_base,
            likelihood_subscore=self.likelihood_subscore,
            impact_subscore=self.impact_subscore,
            epss=self.epss,
            exploit_exists=self.exploit_exists,
            scope_change=self.scope_change,
            ransomware=self.ransomware,
            attack_vector=AttackVector.parse(self.attack_vector),
            component_ref=component_ref,
        )


def _pick_metric(metrics: Mapping[str, Any]) -> Mapping[str, Any] | None:
    for key in ("cvssMetricV31", "cvssMetricV30"):
        entries = metrics.get(key) or []
        if entries:
            primary = [m for m in entries if m.get("type") == "Primary"]
            return (primary or entries)[0]
    return None


def parse_nvd_page(body: Mapping[str, Any], source: str, fetched_at: str) -> list[EnrichmentRecord]:
    out = []
    try:
        items = body["vulnerabilities"]
    except (KeyError, TypeError):
        raise EnrichmentError("NVD response has no 'vulnerabilities' list") from None
    for item in items:
        try:
            cve = item["cve"]
            cve_id = cve["id"]
            metric = _pick_metric(cve.get("metrics") or {})
            if metric is None:
                warnings.warn(f"{cve_id} has no CVSS v3 metrics; skipped", stacklevel=2)
                continue
            data = metric["cvssData"]
            out.append(EnrichmentRecord(
                cve_id=cve_id,
                cvss_vector=data.get("vectorString", ""),
                cvss_base=float(data["baseScore"]),
                likelihood_subscore=float(metric["exploitabilityScore"]),
                impact_subscore=float(metric["impactScore"]),
                attack_vector=data["attackVector"],
                scope_change=str(data.get("scope", "UNCHANGED")).upper() == "CHANGED",
                source=source,
                fetched_at=fetched_at,
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise EnrichmentError(f"unparseable NVD item: {exc!r}") from None
    return out


def fetch_vulnerabilities(cpe: CpeId, client: Client) -> list[EnrichmentRecord]:
    """CVEs NVD lists for an exact CPE name, ordered by CVE id."""
    records: list[EnrichmentRecord] = []
    start = 0
    while True:
        params = {"cpeName": cpe.full, "resultsPerPage": NVD_PAGE_SIZE, "startIndex": start}
        body, fetched_at = client.get_json(NVD_URL, params, needs_key=True)
        records.extend(parse_nvd_page(body, client.config.mode, fetched_at))
        total = int(body.get("totalResults", 0))
        start += int(body.get("resultsPerPage", NVD_PAGE_SIZE)) or NVD_PAGE_SIZE
        if start >= total:
            break
    unique = {r.cve_id: r for r in records}
    return [unique[k] for k in sorted(unique)]


# ---------------------------------------------------------------------------
# EPSS


@dataclass(frozen=True)
class EpssResult:
    scores: dict[str, float]
    misses: tuple[str, ...] = ()


def fetch_epss(cve_ids: Sequence[str], client: Client) -> EpssResult:
    wanted = sorted(set(cve_ids))
    scores: dict[str, float] = {}
    for i in range(0, len(wanted), EPSS_BATCH):
        batch = wanted[i : i + EPSS_BATCH]
        body, _ = client.get_json(EPSS_URL, {"cve": ",".join(batch)})
        try:
            for row in body["data"]:
                value = float(row["epss"])
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"epss {value} outside [0, 1]")
                if row["cve"] in batch:
                    scores[row["cve"]] = value
        except (KeyError, TypeError, ValueError) as exc:
            raise EnrichmentError(f"unparseable EPSS response: {exc}") from None
    return EpssResult(scores, tuple(c for c in wanted if c not in scores))


# ---------------------------------------------------------------------------
# threat flags


def _flag(value: str, where: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "y"):
        return True
    if v in ("0", "false", "no", "n", ""):
        return False
    raise EnrichmentError(f"{where}: cannot read {value!r} as a flag")


def read_flags(path: str | Path) -> dict[str, tuple[bool, bool]]:
    """CSV with columns cve_id, exploit_exists, ransomware."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise EnrichmentError(f"cannot read flags file {path}: {exc}") from None
    rows = list(csv.DictReader(text.splitlines()))
    if not rows:
        return {}
    missing = {"cve_id", "exploit_exists", "ransomware"} - set(rows[0])
    if missing:
        raise EnrichmentError(f"flags file {path} lacks columns {sorted(missing)}")
    flags = {}
    for n, row in enumerate(rows, start=2):
        where = f"{path}:{n}"
        cve = (row["cve_id"] or "").strip()
        if not cve:
            raise EnrichmentError(f"{where}: empty cve_id")
        flags[cve] = (_flag(row["exploit_exists"] or "", where), _flag(row["ransomware"] or "", where))
    return flags


def annotate_threat_flags(records: Sequence[EnrichmentRecord], flags_file: str | Path) -> list[EnrichmentRecord]:
    flags = read_flags(flags_file)
    known = {r.cve_id for r in records}
    unflagged = sorted(known - set(flags))
    if unflagged:
        warnings.warn(f"no threat flags for {', '.join(unflagged)}; assuming none", stacklevel=2)
    stray = sorted(set(flags) - known)
    if stray:
        warnings.warn(f"flags given for unknown CVEs ignored: {', '.join(stray)}", stacklevel=2)
    out = []
    for r in records:
        exploit, ransom = flags.get(r.cve_id, (False, False))
        out.append(replace(r, exploit_exists=exploit, ransomware=ransom))
    return out


# ---------------------------------------------------------------------------
# inventory enrichment


def _record_to_entry(r: EnrichmentRecord) -> dict[str, Any]:
    entry = {
        "cve_id": r.cve_id,
        "cvss_version": "3.1",
        "cvss_vector": r.cvss_vector,
        "cvss_base": r.cvss_base,
        "likelihood_subscore": r.likelihood_subscore,
        "impact_subscore": r.impact_subscore,
        "epss": r.epss,
        "exploit_exists": r.exploit_exists,
        "scope_change": r.scope_change,
        "ransomware": r.ransomware,
        "attack_vector": AttackVector.parse(r.attack_vector).value,
        "source": r.source,
        "fetched_at": r.fetched_at,
    }
    if not r.cvss_vector:
        del entry["cvss_vector"]
    return entry


@dataclass
class EnrichSummary:
    components: int = 0
    cves: int = 0
    epss_misses: list[str] = field(default_factory=list)


def enrich_document(doc: Mapping[str, Any], client: Client, flags_file: str | Path | None = None
                    ) -> tuple[dict[str, Any], EnrichSummary]:
    """Populate components that have no vulnerability list yet.

    Components that already list vulnerabilities are left alone, so running
    this on its own output changes nothing. The input is not modified.
    """
    out = copy.deepcopy(dict(doc))
    summary = EnrichSummary()
    pending: list[tuple[dict[str, Any], list[EnrichmentRecord]]] = []
    for asset in out.get("assets") or []:
        for comp in asset.get("components") or []:
            if "vulnerabilities" in comp:
                continue
            node = ComponentNode(
                id=str(comp.get("id", "")),
                vendor=str(comp.get("vendor", "")),
                product=str(comp.get("product", "")),
                version=str(comp.get("version", "")),
                part=Part(str(comp.get("part", "application")).lower()),
            )
            cpe = generate_cpe(node)
            comp["cpe"] = str(cpe)
            pending.append((comp, fetch_vulnerabilities(cpe, client)))
            summary.components += 1

    all_ids = sorted({r.cve_id for _, recs in pending for r in recs})
    epss = fetch_epss(all_ids, client) if all_ids else EpssResult({})
    summary.epss_misses = list(epss.misses)
    if epss.misses:
        warnings.warn(f"no EPSS score for {', '.join(epss.misses)}; using 0", stacklevel=2)
    flat = [replace(r, epss=epss.scores.get(r.cve_id, 0.0)) for _, recs in pending for r in recs]
    if flags_file is not None and flat:
        flat = annotate_threat_flags(flat, flags_file)
    done = iter(flat)
    for comp, recs in pending:
        comp["vulnerabilities"] = [_record_to_entry(next(done)) for _ in recs]
        summary.cves += len(recs)
    return out, summary


def records_from_entries(entries: Iterable[Mapping[str, Any]]) -> list[EnrichmentRecord]:
    return [
        EnrichmentRecord(
            cve_id=e["cve_id"], cvss_vector=e.get("cvss_vector", ""), cvss_base=float(e["cvss_base"]),
            likelihood_subscore=float(e["likelihood_subscore"]), impact_subscore=float(e["impact_subscore"]),
            attack_vector=str(e["attack_vector"]), scope_change=bool(e["scope_change"]), epss=float(e["epss"]),
            exploit_exists=bool(e["exploit_exists"]), ransomware=bool(e["ransomware"]),
            source=e.get("source", "fixture"), fetched_at=e.get("fetched_at", ""),
        )
        for e in entries
    ]

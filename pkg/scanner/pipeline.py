"""
Scan pipeline: APK bytes in, ScanResult out.

open archive -> decode manifest -> build manifest model -> parse every DEX
entry -> run all rules. Batch scans run on a bounded thread pool and keep
input order.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from django.conf import settings

from apk.archive import MANIFEST_NAME, archive_from_bytes, dex_entry_names, open_apk, read_entry
from apk.axml import decode_axml
from apk.dex import parse_dex
from apk.exceptions import ParseError
from apk.manifest import build_manifest_model
from rules.engine import run_all_rules
from rules.models import ScanInput, ScanResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanOutcome:
    path: str
    result: Optional[ScanResult] = None
    error: Optional[Exception] = None

    @property
    def ok(self):
        return self.error is None


def load_scan_input(archive, apk_name):
    manifest = build_manifest_model(decode_axml(read_entry(archive, MANIFEST_NAME)))
    names = tuple(dex_entry_names(archive))
    dexes = tuple(parse_dex(read_entry(archive, name), name=name) for name in names)
    return ScanInput(manifest=manifest, dexes=dexes, apk_name=apk_name, dex_names=names)


def scan_archive(archive, apk_name):
    logger.info('scanning %s', apk_name)
    scan = load_scan_input(archive, apk_name)
    result = run_all_rules(scan)
    logger.info('finished %s: %d/%d rules flagged', apk_name, result.total, len(result.rule_vector))
    return result


def scan_apk(path):
    """Scan one APK file. Raises ParseError or OSError."""
    return scan_archive(open_apk(path), Path(path).name)


def scan_bytes(data, name='<memory>'):
    return scan_archive(archive_from_bytes(data, source_path=name), name)


def _scan_one(path):
    try:
        return ScanOutcome(path=str(path), result=scan_apk(path))
    except (ParseError, OSError) as exc:
        logger.error('%s: %s', path, exc)
        return ScanOutcome(path=str(path), error=exc)


def scan_many(paths, workers=None):
    """Scan every path; failures come back as outcomes instead of raising."""
    paths = list(paths)
    workers = max(1, workers or settings.SCAN_MAX_WORKERS)
    if workers == 1 or len(paths) < 2:
        return [_scan_one(path) for path in paths]
    with ThreadPoolExecutor(max_workers=min(workers, len(paths))) as pool:
        return list(pool.map(_scan_one, paths))

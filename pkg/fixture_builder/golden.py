"""SHA-256 digests of fixture payloads, kept in data/golden_hashes.json to catch encoder drift."""

import json
from pathlib import Path

from .builder import build
from .profiles import bank_fleet, rule_corpus

GOLDEN_PATH = Path(__file__).resolve().parent / 'data' / 'golden_hashes.json'
SCHEMA_VERSION = 1


def all_profiles():
    return bank_fleet() + rule_corpus()


def current_hashes(profiles=None):
    return {
        profile.name: build(profile).payload_sha256
        for profile in (profiles if profiles is not None else all_profiles())
    }


def load_golden(path=GOLDEN_PATH):
    return json.loads(Path(path).read_text(encoding='utf-8')).get('fixtures', {})


def write_golden(path=GOLDEN_PATH, profiles=None):
    hashes = current_hashes(profiles)
    document = {'schema_version': SCHEMA_VERSION, 'fixtures': hashes}
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return hashes

"""Seeded truncations and byte flips of fixture inputs must end in a ParseError or a clean decode."""

import random

from django.test import SimpleTestCase

from apk.archive import archive_from_bytes, read_entry
from apk.axml import decode_axml
from apk.dex import parse_dex
from apk.exceptions import ParseError
from apk.manifest import build_manifest_model
from fixture_builder.builder import build
from fixture_builder.profiles import bank_fleet

SEED = 20211
ROUNDS_PER_FORMAT = 3334


def mutate(data, rng):
    """Either truncate or flip a handful of bytes. Returns (bytes, truncated)."""
    if rng.random() < 0.4:
        return data[:rng.randrange(len(data))], True
    mutated = bytearray(data)
    for _ in range(rng.randint(1, 4)):
        mutated[rng.randrange(len(mutated))] ^= rng.randint(1, 255)
    return bytes(mutated), False


def read_apk(data):
    archive = archive_from_bytes(data)
    for name in archive.names:
        read_entry(archive, name)


def read_manifest(data):
    build_manifest_model(decode_axml(data))


class FuzzTests(SimpleTestCase):
    def setUp(self):
        fixtures = [build(profile) for profile in bank_fleet()]
        self.apks = [fixture.apk for fixture in fixtures]
        self.manifests = [fixture.manifest for fixture in fixtures]
        self.dexes = [payload for fixture in fixtures for _, payload in fixture.dexes]

    def run_mutations(self, samples, parse, seed):
        rng = random.Random(seed)
        for round_number in range(ROUNDS_PER_FORMAT):
            data, truncated = mutate(rng.choice(samples), rng)
            try:
                parse(data)
            except ParseError:
                continue
            except Exception as exc:
                self.fail(f'round {round_number} (seed {seed}) escaped as {type(exc).__name__}: {exc}')
            if truncated:
                self.fail(f'round {round_number} (seed {seed}): truncated input decoded silently')

    def test_apk_mutations(self):
        self.run_mutations(self.apks, read_apk, SEED)

    def test_manifest_mutations(self):
        self.run_mutations(self.manifests, read_manifest, SEED + 1)

    def test_dex_mutations(self):
        self.run_mutations(self.dexes, parse_dex, SEED + 2)

"""
Threat and countermeasure knowledge base.

The tables live in a JSON data file (settings.SCAN_KNOWLEDGE_BASE) so wording
fixes never touch rule code. Layout, schema_version 1:

    {
      "schema_version": 1,
      "threats": [{"name": ..., "summary": ...}, ...],
      "rules": [{"rule_id": "R01", "threat_name": ..., "threat_description": ...,
                 "developer_countermeasure": ..., "background": ...}, ...],
      "user_countermeasures": [{"text": ...}, ...]
    }

Every RuleId must have exactly one record and every threat_name must be one
of the listed threats. A file that breaks either raises ImproperlyConfigured.
"""

import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from .models import RuleId

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
USER_COUNTERMEASURE_COUNT = 6
DEFAULT_PATH = Path(__file__).resolve().parent / 'data' / 'knowledge_base.json'
RULE_FIELDS = ('rule_id', 'threat_name', 'threat_description', 'developer_countermeasure', 'background')


@dataclass(frozen=True)
class ThreatEntry:
    rule: RuleId
    threat_name: str
    description: str
    summary: str = ''


@dataclass(frozen=True)
class CountermeasureEntry:
    rule: RuleId
    developer_action: str


@dataclass(frozen=True)
class UserCountermeasure:
    text: str

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class KnowledgeBase:
    schema_version: int
    threats: dict
    countermeasures: dict
    backgrounds: dict
    user_countermeasures: tuple

    def threat_for(self, rule):
        return self.threats[RuleId(rule)]

    def countermeasure_for(self, rule):
        return self.countermeasures[RuleId(rule)]

    def background_for(self, rule):
        return self.backgrounds[RuleId(rule)]


def _require(record, fields, where):
    missing = [name for name in fields if not str(record.get(name) or '').strip()]
    if missing:
        raise ImproperlyConfigured(f'knowledge base {where} is missing {", ".join(missing)}')


def parse_knowledge_base(raw, source='<memory>'):
    """Validate a decoded KB document and build the lookup tables."""
    if raw.get('schema_version') != SCHEMA_VERSION:
        raise ImproperlyConfigured(
            f'{source}: schema_version {raw.get("schema_version")!r} is not supported'
        )

    summaries = {}
    for threat in raw.get('threats', []):
        _require(threat, ('name', 'summary'), 'threat')
        summaries[threat['name']] = threat['summary']

    threats, countermeasures, backgrounds = {}, {}, {}
    for record in raw.get('rules', []):
        _require(record, RULE_FIELDS, f'rule record {record.get("rule_id")!r}')
        try:
            rule = RuleId(record['rule_id'])
        except ValueError:
            raise ImproperlyConfigured(f'{source}: unknown rule id {record["rule_id"]!r}')
        if rule in threats:
            raise ImproperlyConfigured(f'{source}: {rule} is described twice')
        if record['threat_name'] not in summaries:
            raise ImproperlyConfigured(f'{source}: {rule} names unknown threat {record["threat_name"]!r}')
        threats[rule] = ThreatEntry(
            rule=rule,
            threat_name=record['threat_name'],
            description=record['threat_description'],
            summary=summaries[record['threat_name']],
        )
        countermeasures[rule] = CountermeasureEntry(rule=rule, developer_action=record['developer_countermeasure'])
        backgrounds[rule] = record['background']

    missing = [rule for rule in RuleId if rule not in threats]
    if missing:
        raise ImproperlyConfigured(f'{source}: no record for {", ".join(missing)}')

    user = tuple(UserCountermeasure(text=item['text']) for item in raw.get('user_countermeasures', []))
    if len(user) != USER_COUNTERMEASURE_COUNT:
        raise ImproperlyConfigured(
            f'{source}: expected {USER_COUNTERMEASURE_COUNT} user countermeasures, found {len(user)}'
        )

    return KnowledgeBase(
        schema_version=SCHEMA_VERSION,
        threats=threats,
        countermeasures=countermeasures,
        backgrounds=backgrounds,
        user_countermeasures=user,
    )


@lru_cache(maxsize=None)
def load_knowledge_base(path):
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding='utf-8'))
    except (OSError, ValueError) as exc:
        raise ImproperlyConfigured(f'cannot load knowledge base {path}: {exc}') from exc
    kb = parse_knowledge_base(raw, source=str(path))
    logger.debug('loaded knowledge base %s (%d rules)', path, len(kb.threats))
    return kb


def knowledge_base():
    return load_knowledge_base(str(getattr(settings, 'SCAN_KNOWLEDGE_BASE', DEFAULT_PATH)))


def threat_for(rule):
    return knowledge_base().threat_for(rule)


def countermeasure_for(rule):
    return knowledge_base().countermeasure_for(rule)


def background_for(rule):
    return knowledge_base().background_for(rule)


def user_countermeasures():
    return list(knowledge_base().user_countermeasures)

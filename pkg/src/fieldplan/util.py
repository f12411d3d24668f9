"""Small shared helpers."""

from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    """Byte-stable JSON: sorted keys, no whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

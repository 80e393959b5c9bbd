"""Canonical JSON serialization.

Byte stability is a contract: event log lines, definition documents, state
snapshots, and simulation reports must serialize to identical bytes for
identical values. One dialect everywhere: UTF-8, sorted keys, no trailing
spaces, LF line ends.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

# Compact form: event log lines, digests.
_COMPACT = {"sort_keys": True, "separators": (",", ":"), "ensure_ascii": False}
# Document form: definition files, snapshots, anything a human edits or diffs.
_PRETTY = {"sort_keys": True, "indent": 2, "ensure_ascii": False}


def canonical_line(value: Any) -> str:
    """One-line canonical JSON (no newline appended)."""
    return json.dumps(value, **_COMPACT)


def canonical_document(value: Any) -> str:
    """Multi-line canonical JSON document, newline-terminated."""
    return json.dumps(value, **_PRETTY) + "\n"


def digest(value: Any) -> str:
    """sha256 hex digest of the compact canonical form."""
    return hashlib.sha256(canonical_line(value).encode("utf-8")).hexdigest()

"""Line-oriented record parser for circuit, pool and operator files.

Each non-blank line is one record::

    # ansatz n_qubits:4          section header
    rot YIII param:0 sign:1      parametrised rotation
    frot ZZII angle:0.25         bound rotation
    fixed CZ targets:0,1         fixed gate
    XYI                          pool member
    term ZZI coeff:0.1           operator term
    ## free text                 comment

Produces a :class:`ParsedRecord` on success or a :class:`ParseError` on failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from fcp_core.tokenizer import is_key_value, parse_key_value, tokenize

SECTIONS = ("ansatz", "pool", "operator")

_GATE_KINDS = {"rot", "frot", "fixed", "term"}

# Required params per record kind
_REQUIRED: dict[str, tuple[str, ...]] = {
    "rot": ("param",),
    "frot": ("angle",),
    "fixed": ("targets",),
    "term": ("coeff",),
    "header": ("n_qubits",),
}


@dataclass
class ParsedRecord:
    """Successfully parsed record."""

    kind: str  # header | rot | frot | fixed | term | member
    raw: str
    target: str | None = None
    params: dict[str, str] = field(default_factory=dict)


@dataclass
class ParseError:
    """Parsing failure."""

    error: str
    raw: str


def is_comment(line: str) -> bool:
    s = line.strip()
    return not s or s.startswith("##")


def parse_record(line: str) -> ParsedRecord | ParseError:
    """Parse one non-comment line into a :class:`ParsedRecord`.

    Parameters
    ----------
    line : str
        The raw line, e.g. ``'rot XIZI param:3 sign:-1'``.

    Returns
    -------
    ParsedRecord | ParseError
    """
    raw = line.strip()
    if not raw:
        return ParseError(error="Empty record", raw=raw)

    header = raw.startswith("#")
    body = raw[1:].strip() if header else raw

    try:
        tokens = tokenize(body)
    except ValueError as exc:
        return ParseError(error=f"Tokenization failed: {exc}", raw=raw)
    if not tokens:
        return ParseError(error="No tokens after tokenization", raw=raw)

    params: dict[str, str] = {}
    positional: list[str] = []
    for token in tokens:
        if is_key_value(token):
            k, v = parse_key_value(token)
            if k in params:
                return ParseError(error=f"Duplicate parameter {k!r}", raw=raw)
            params[k] = v
        else:
            positional.append(token)

    if header:
        if len(positional) != 1 or positional[0].lower() not in SECTIONS:
            return ParseError(
                error=f"Header must name one section of {SECTIONS}", raw=raw
            )
        return _checked(ParsedRecord("header", raw, positional[0].lower(), params))

    head = positional[0].lower() if positional else ""
    if head in _GATE_KINDS:
        if len(positional) != 2:
            return ParseError(error=f"{head} expects exactly one target", raw=raw)
        return _checked(ParsedRecord(head, raw, positional[1], params))

    if len(positional) == 1 and not params:
        return ParsedRecord("member", raw, positional[0], params)
    return ParseError(error=f"Unknown record: {raw!r}", raw=raw)


def _checked(record: ParsedRecord) -> ParsedRecord | ParseError:
    missing = [k for k in _REQUIRED.get(record.kind, ()) if k not in record.params]
    if missing:
        return ParseError(
            error=f"{record.kind} record missing {', '.join(missing)}", raw=record.raw
        )
    return record

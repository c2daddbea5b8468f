"""Access-log parsing, sessionization and the sessions JSONL format."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Iterable, Iterator, Literal
from urllib.parse import parse_qsl, unquote, urlsplit

from .errors import MalformedLine, SchemaViolation

ParamPairs = tuple[tuple[str, str], ...]

SESSION_SOURCES = ("log", "synthetic", "fixture")

# Cookie names recognised as session tokens, most specific first.
SESSION_COOKIES = ("JSESSIONID", "PHPSESSID", "ASP.NET_SessionId", "sessionid", "session")

_CLF = re.compile(
    r'^(?P<client>\S+) (?P<ident>\S+) (?P<user>\S+) \[(?P<ts>[^\]]+)\] '
    r'"(?P<method>[A-Z]+) (?P<target>\S+)(?: (?P<proto>[^"\s]+))?" '
    r'(?P<status>\d{3}) (?P<size>\d+|-)'
    r'(?: "(?P<cookie>[^"]*)")?\s*$'
)


@dataclass(frozen=True)
class Request:
    url: str
    params: ParamPairs = ()

    @property
    def param_names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.params)


@dataclass(frozen=True)
class RawRequestRecord:
    client: str
    timestamp: float
    method: str
    url: str
    params: ParamPairs
    status: int
    session_key: str | None = None

    def to_request(self) -> Request:
        return Request(self.url, self.params)


@dataclass
class UserSession:
    id: str
    requests: list[Request]
    source: str = "log"

    def __post_init__(self) -> None:
        if not self.requests:
            raise ValueError(f"session {self.id!r} has no requests")
        if self.source not in SESSION_SOURCES:
            raise ValueError(f"unknown session source {self.source!r}")


@dataclass(frozen=True)
class SessionizePolicy:
    key_mode: Literal["cookie", "client-id"] = "cookie"
    idle_timeout: float = 1800.0
    max_session_length: int | None = None

    def __post_init__(self) -> None:
        if not self.idle_timeout > 0:
            raise ValueError("idle_timeout must be positive")
        if self.max_session_length is not None and self.max_session_length < 1:
            raise ValueError("max_session_length must be at least 1")


def split_target(target: str) -> tuple[str, ParamPairs]:
    """Split a request target into a decoded path and ordered parameter pairs."""
    parts = urlsplit(target)
    path = unquote(parts.path) or "/"
    if not path.startswith("/"):
        raise MalformedLine(f"request target {target!r} is not a path")
    params = tuple(parse_qsl(parts.query, keep_blank_values=True))
    return path, params


def _cookie_session_key(field_text: str | None) -> str | None:
    if field_text is None:
        return None
    field_text = field_text.strip()
    if not field_text or field_text == "-":
        return None
    pairs = []
    for chunk in field_text.split(";"):
        name, sep, value = chunk.strip().partition("=")
        if sep:
            pairs.append((name.strip(), value.strip()))
    if not pairs:
        return field_text
    by_name = dict(pairs)
    for name in SESSION_COOKIES:
        if name in by_name:
            return by_name[name]
    return pairs[0][1]


def _parse_clf(line: str) -> RawRequestRecord:
    m = _CLF.match(line.rstrip("\r\n"))
    if m is None:
        raise MalformedLine("does not match the extended common log format", line)
    try:
        ts = datetime.strptime(m["ts"], "%d/%b/%Y:%H:%M:%S %z").timestamp()
    except ValueError as exc:
        raise MalformedLine(f"bad timestamp {m['ts']!r}", line) from exc
    url, params = split_target(m["target"])
    return RawRequestRecord(
        client=m["client"],
        timestamp=ts,
        method=m["method"],
        url=url,
        params=params,
        status=int(m["status"]),
        session_key=_cookie_session_key(m["cookie"]),
    )


def _parse_jsonl(line: str) -> RawRequestRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(f"invalid JSON: {exc.msg}", line) from exc
    if not isinstance(obj, dict):
        raise MalformedLine("record is not a JSON object", line)
    try:
        client = str(obj["client"])
        raw_ts = obj["timestamp"]
        target = str(obj["url"])
    except KeyError as exc:
        raise MalformedLine(f"missing field {exc.args[0]!r}", line) from None
    if isinstance(raw_ts, str):
        try:
            ts = datetime.fromisoformat(raw_ts).timestamp()
        except ValueError as exc:
            raise MalformedLine(f"bad timestamp {raw_ts!r}", line) from exc
    elif isinstance(raw_ts, (int, float)) and not isinstance(raw_ts, bool):
        ts = float(raw_ts)
    else:
        raise MalformedLine(f"bad timestamp {raw_ts!r}", line)
    url, params = split_target(target)
    session = obj.get("session")
    return RawRequestRecord(
        client=client,
        timestamp=ts,
        method=str(obj.get("method", "GET")),
        url=url,
        params=params,
        status=int(obj.get("status", 200)),
        session_key=str(session) if session not in (None, "", "-") else None,
    )


def parse_log_line(line: str, format: str = "clf-extended") -> RawRequestRecord:
    """Parse one access-log record.

    ``format`` is ``"clf-extended"`` (common log format plus a trailing
    quoted cookie field) or ``"jsonl"``. Raises :class:`MalformedLine`.
    """
    if format == "clf-extended":
        record = _parse_clf(line)
    elif format == "jsonl":
        record = _parse_jsonl(line)
    else:
        raise ValueError(f"unknown log format {format!r}")
    if not math.isfinite(record.timestamp) or record.timestamp < 0:
        raise MalformedLine(f"timestamp {record.timestamp} out of range", line)
    return record


@dataclass
class ParseStats:
    lines: int = 0
    skipped: int = 0
    errors: list[MalformedLine] = field(default_factory=list)


def parse_log(
    lines: Iterable[str], format: str = "clf-extended", strict: bool = False,
    stats: ParseStats | None = None,
) -> list[RawRequestRecord]:
    """Parse a whole log; malformed lines are skipped and counted unless ``strict``."""
    stats = stats if stats is not None else ParseStats()
    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        stats.lines += 1
        try:
            records.append(parse_log_line(line, format))
        except MalformedLine as exc:
            exc.lineno = lineno
            if strict:
                raise
            stats.skipped += 1
            stats.errors.append(exc)
    return records


def group_records(
    records: Iterable[RawRequestRecord], policy: SessionizePolicy = SessionizePolicy()
) -> list[list[RawRequestRecord]]:
    """Group records into per-session runs, ordered by first timestamp."""
    ordered = sorted(enumerate(records), key=lambda item: (item[1].timestamp, item[0]))
    open_runs: dict[tuple[str, str], list[RawRequestRecord]] = {}
    runs: list[list[RawRequestRecord]] = []
    for _, rec in ordered:
        if policy.key_mode == "cookie" and rec.session_key is not None:
            key = ("cookie", rec.session_key)
        else:
            key = ("client", rec.client)
        run = open_runs.get(key)
        if (
            run is None
            or rec.timestamp - run[-1].timestamp > policy.idle_timeout
            or (policy.max_session_length is not None and len(run) >= policy.max_session_length)
        ):
            run = []
            open_runs[key] = run
            runs.append(run)
        run.append(rec)
    # runs were created in order of their first (sorted) record
    return runs


def sessionize(
    records: Iterable[RawRequestRecord], policy: SessionizePolicy = SessionizePolicy()
) -> list[UserSession]:
    runs = group_records(records, policy)
    width = max(4, len(str(len(runs))))
    return [
        UserSession(f"s{i:0{width}d}", [r.to_request() for r in run], source="log")
        for i, run in enumerate(runs, 1)
    ]


def _session_from_obj(obj: object, lineno: int) -> UserSession:
    if not isinstance(obj, dict):
        raise SchemaViolation("session must be a JSON object", lineno)
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise SchemaViolation("session 'id' must be a non-empty string", lineno)
    reqs = obj.get("requests")
    if not isinstance(reqs, list) or not reqs:
        raise SchemaViolation(f"session {sid!r}: 'requests' must be a non-empty list", lineno)
    requests = []
    for req in reqs:
        if not isinstance(req, dict) or not isinstance(req.get("url"), str):
            raise SchemaViolation(f"session {sid!r}: request needs a string 'url'", lineno)
        url = req["url"]
        if not url.startswith("/") or "?" in url:
            raise SchemaViolation(f"session {sid!r}: bad url {url!r}", lineno)
        params = req.get("params", [])
        if not isinstance(params, list) or not all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)
            for p in params
        ):
            raise SchemaViolation(f"session {sid!r}: params must be [name, value] pairs", lineno)
        requests.append(Request(url, tuple((n, v) for n, v in params)))
    source = obj.get("source", "log")
    if source not in SESSION_SOURCES:
        raise SchemaViolation(f"session {sid!r}: unknown source {source!r}", lineno)
    return UserSession(sid, requests, source)


def iter_sessions(fp: IO[str]) -> Iterator[UserSession]:
    seen: set[str] = set()
    for lineno, line in enumerate(fp, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"invalid JSON: {exc.msg}", lineno) from None
        session = _session_from_obj(obj, lineno)
        if session.id in seen:
            raise SchemaViolation(f"duplicate session id {session.id!r}", lineno)
        seen.add(session.id)
        yield session


def load_sessions(path_or_fp, format: str = "jsonl-sessions") -> list[UserSession]:
    if format != "jsonl-sessions":
        raise ValueError(f"unknown sessions format {format!r}")
    if hasattr(path_or_fp, "read"):
        return list(iter_sessions(path_or_fp))
    with open(path_or_fp, encoding="utf-8") as fp:
        return list(iter_sessions(fp))


def session_to_obj(session: UserSession) -> dict:
    return {
        "id": session.id,
        "source": session.source,
        "requests": [
            {"url": r.url, "params": [[n, v] for n, v in r.params]} for r in session.requests
        ],
    }


def dump_sessions(sessions: Iterable[UserSession], fp: IO[str]) -> None:
    for s in sessions:
        fp.write(json.dumps(session_to_obj(s), separators=(",", ":")))
        fp.write("\n")


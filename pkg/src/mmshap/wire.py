"""Newline-delimited JSON wire protocol for out-of-process oracles.

Frames, one JSON object per line:

* handshake: ``{"type":"hello","protocol":1}`` answered by
  ``{"type":"ready","batch_limit":B}`` (optionally with ``"score_type"``);
* registration: ``{"type":"register","sample":...,"assets":{...}}``
  answered by ``{"type":"registered","sample_id":...}``, optionally with
  ``"realized_tokens":[{"label":...,"special":...}]`` when the oracle
  tokenizes text itself;
* evaluation: ``{"type":"eval","requests":[{"request_id":K,
  "sample_id":S,"mask":HEX}]}`` answered by
  ``{"type":"values","responses":[{"request_id":K,"value":V}]}``;
* failure: ``{"type":"error","code":...,"message":...}`` with an optional
  ``"request_id"``.

Coalition masks travel as lowercase minimal hex of the little-endian bit
packing, token 0 being the least significant bit.  The byte layout of
frames is normative; golden transcript tests pin it.

Two transports speak these frames: a child process over stdio and an HTTP
endpoint answering one POSTed frame per request.
"""

from __future__ import annotations

import json
import math
import queue
import shlex
import socket
import subprocess
import threading
import urllib.error
import urllib.request
from collections import deque
from typing import Any, Mapping, Sequence

from .errors import (
    ConfigError,
    IndexOutOfRange,
    LengthMismatch,
    OracleError,
    OracleTimeout,
    ProtocolViolation,
    UnknownSample,
)
from .oracle import (
    OracleRequest,
    OracleResponse,
    RealizedToken,
    RegistrationResult,
    ValueOracle,
    make_builtin_oracle,
)
from .types import CoalitionMask, TokenizedSample

__all__ = [
    "PROTOCOL_VERSION",
    "mask_to_hex",
    "mask_from_hex",
    "encode_frame",
    "decode_frame",
    "hello_frame",
    "register_frame",
    "eval_frame",
    "SubprocessOracle",
    "HttpOracle",
    "resolve_oracle",
]

PROTOCOL_VERSION = 1

DEFAULT_TIMEOUT = 120.0

# Error frame codes that map onto specific exceptions; anything else
# surfaces as a generic OracleError carrying the code.
_CODE_ERRORS: dict[str, type[OracleError]] = {
    "unknown_sample": UnknownSample,
    "length_mismatch": LengthMismatch,
    "index_out_of_range": IndexOutOfRange,
}


def mask_to_hex(mask: CoalitionMask) -> str:
    """Lowercase minimal hex of the mask bits; token 0 is the LSB."""
    return format(mask.to_int(), "x")


def mask_from_hex(text: str, n_tokens: int) -> CoalitionMask:
    """Inverse of :func:`mask_to_hex`; validates the value fits the sample."""
    try:
        value = int(text, 16)
    except ValueError:
        raise ProtocolViolation(f"invalid mask hex {text!r}") from None
    if value < 0 or value >= (1 << n_tokens):
        raise ProtocolViolation(
            f"mask {text!r} does not fit a {n_tokens}-token sample"
        )
    return CoalitionMask.from_int(value, n_tokens)


def encode_frame(frame: Mapping[str, Any]) -> str:
    """One frame as a newline-terminated compact JSON line."""
    return json.dumps(frame, separators=(",", ":")) + "\n"


def decode_frame(line: str) -> dict[str, Any]:
    try:
        frame = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"frame is not valid JSON: {line!r}") from exc
    if not isinstance(frame, dict) or "type" not in frame:
        raise ProtocolViolation(f"frame has no type: {line!r}")
    return frame


def hello_frame() -> dict[str, Any]:
    return {"type": "hello", "protocol": PROTOCOL_VERSION}


def register_frame(
    sample: TokenizedSample, assets: Mapping[str, Any] | None
) -> dict[str, Any]:
    return {"type": "register", "sample": sample.to_dict(), "assets": dict(assets or {})}


def eval_frame(requests: Sequence[OracleRequest]) -> dict[str, Any]:
    return {
        "type": "eval",
        "requests": [
            {
                "request_id": r.request_id,
                "sample_id": r.sample_id,
                "mask": mask_to_hex(r.mask),
            }
            for r in requests
        ],
    }


def _raise_error_frame(frame: Mapping[str, Any]) -> None:
    code = str(frame.get("code", "unknown"))
    message = str(frame.get("message", ""))
    exc_type = _CODE_ERRORS.get(code, OracleError)
    raise exc_type(f"oracle error [{code}]: {message}")


class _FramedOracle(ValueOracle):
    """Shared request/response logic over any one-frame-in, one-frame-out
    transport."""

    def __init__(self) -> None:
        self._exchange_lock = threading.Lock()

    def _exchange(self, frame: Mapping[str, Any]) -> dict[str, Any]:
        raise NotImplementedError

    def _handshake(self) -> None:
        reply = self._exchange(hello_frame())
        if reply.get("type") == "error":
            _raise_error_frame(reply)
        if reply.get("type") != "ready":
            raise ProtocolViolation(f"expected a ready frame, got {reply!r}")
        try:
            self.batch_limit = max(1, int(reply["batch_limit"]))
        except (KeyError, TypeError, ValueError):
            raise ProtocolViolation(
                f"ready frame lacks a usable batch_limit: {reply!r}"
            ) from None
        score_type = reply.get("score_type", "unbounded")
        if score_type not in ("unbounded", "probability"):
            raise ProtocolViolation(f"unknown score_type {score_type!r}")
        self.score_type = score_type

    def register(
        self, sample: TokenizedSample, assets: Mapping[str, Any] | None = None
    ) -> RegistrationResult:
        with self._exchange_lock:
            reply = self._exchange(register_frame(sample, assets))
        if reply.get("type") == "error":
            _raise_error_frame(reply)
        if reply.get("type") != "registered":
            raise ProtocolViolation(f"expected a registered frame, got {reply!r}")
        if reply.get("sample_id") != sample.sample_id:
            raise ProtocolViolation(
                f"registered frame answers sample {reply.get('sample_id')!r}, "
                f"not {sample.sample_id!r}"
            )
        realized = reply.get("realized_tokens")
        realized_tokens: tuple[RealizedToken, ...] | None = None
        if realized is not None:
            try:
                realized_tokens = tuple(
                    RealizedToken(label=str(t["label"]), special=bool(t.get("special", False)))
                    for t in realized
                )
            except (TypeError, KeyError):
                raise ProtocolViolation(
                    f"malformed realized_tokens in {reply!r}"
                ) from None
        return RegistrationResult(
            sample_id=sample.sample_id, realized_tokens=realized_tokens
        )

    def evaluate(self, requests: Sequence[OracleRequest]) -> list[OracleResponse]:
        responses: list[OracleResponse] = []
        for start in range(0, len(requests), self.batch_limit):
            chunk = requests[start : start + self.batch_limit]
            with self._exchange_lock:
                reply = self._exchange(eval_frame(chunk))
            if reply.get("type") == "error":
                _raise_error_frame(reply)
            if reply.get("type") != "values":
                raise ProtocolViolation(f"expected a values frame, got {reply!r}")
            raw = reply.get("responses")
            if not isinstance(raw, list):
                raise ProtocolViolation(f"values frame has no responses: {reply!r}")
            by_id: dict[int, float] = {}
            for item in raw:
                try:
                    value = float(item["value"])
                    rid = int(item["request_id"])
                except (TypeError, KeyError, ValueError):
                    raise ProtocolViolation(
                        f"malformed response entry {item!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ProtocolViolation(
                        f"oracle returned a non-finite value for request {rid}"
                    )
                by_id[rid] = value
            expected = [r.request_id for r in chunk]
            if set(by_id) != set(expected):
                raise ProtocolViolation(
                    "values frame request ids do not match the batch"
                )
            responses.extend(
                OracleResponse(request_id=rid, value=by_id[rid]) for rid in expected
            )
        return responses


class SubprocessOracle(_FramedOracle):
    """Runs an oracle as a child process speaking frames over stdio.

    A reader thread drains stdout into a queue so receives can time out;
    stderr is drained separately and its tail is attached to protocol
    errors for diagnosis.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT) -> None:
        super().__init__()
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not argv:
            raise ConfigError("empty oracle command")
        self.timeout = timeout
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ConfigError(f"cannot start oracle command {argv[0]!r}: {exc}") from exc
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._stderr_tail: deque[str] = deque(maxlen=50)
        self._reader = threading.Thread(target=self._read_stdout, daemon=True)
        self._reader.start()
        self._stderr_reader = threading.Thread(target=self._read_stderr, daemon=True)
        self._stderr_reader.start()
        self._handshake()

    def _read_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            if line.strip():
                self._lines.put(line)
        self._lines.put(None)

    def _read_stderr(self) -> None:
        assert self._proc.stderr is not None
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    def _diagnostics(self) -> str:
        if not self._stderr_tail:
            return ""
        return " | oracle stderr: " + " / ".join(self._stderr_tail)

    def _exchange(self, frame: Mapping[str, Any]) -> dict[str, Any]:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(encode_frame(frame))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolViolation(
                f"oracle process is gone: {exc}{self._diagnostics()}"
            ) from exc
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise OracleTimeout(
                f"oracle did not answer within {self.timeout}s{self._diagnostics()}"
            ) from None
        if line is None:
            raise ProtocolViolation(
                f"oracle closed its output{self._diagnostics()}"
            )
        return decode_frame(line)

    def close(self) -> None:
        proc = self._proc
        if proc.stdin is not None:
            try:
                proc.stdin.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait(timeout=5)


class HttpOracle(_FramedOracle):
    """POSTs one frame per request to an HTTP endpoint; the body of the
    response is the reply frame."""

    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT) -> None:
        super().__init__()
        self.url = url
        self.timeout = timeout
        self._handshake()

    def _exchange(self, frame: Mapping[str, Any]) -> dict[str, Any]:
        request = urllib.request.Request(
            self.url,
            data=encode_frame(frame).encode("utf-8"),
            headers={"Content-Type": "application/x-ndjson"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as reply:
                body = reply.read().decode("utf-8")
        except socket.timeout:
            raise OracleTimeout(
                f"oracle at {self.url} did not answer within {self.timeout}s"
            ) from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, socket.timeout):
                raise OracleTimeout(
                    f"oracle at {self.url} did not answer within {self.timeout}s"
                ) from None
            raise ProtocolViolation(f"oracle at {self.url} failed: {exc}") from exc
        line = body.strip().splitlines()
        if len(line) != 1:
            raise ProtocolViolation(
                f"expected exactly one frame in the response, got {body!r}"
            )
        return decode_frame(line[0])


def resolve_oracle(spec: str, timeout: float = DEFAULT_TIMEOUT) -> ValueOracle:
    """Turn an oracle spec into a live oracle.

    ``builtin:<name>`` selects a bundled synthetic oracle; ``http://`` and
    ``https://`` URLs attach over HTTP; anything else is run as a child
    process command line.
    """
    if spec.startswith("builtin:"):
        return make_builtin_oracle(spec[len("builtin:") :])
    if spec.startswith(("http://", "https://")):
        return HttpOracle(spec, timeout=timeout)
    return SubprocessOracle(spec, timeout=timeout)

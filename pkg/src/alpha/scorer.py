"""Adapter for plugging an external function scorer into the pipeline.

Wire protocol, newline-delimited both ways: the request is one sentence
(space-joined words), the response is ``<p_benign> <p_malicious>`` in
decimal text. Transport is either the stdin/stdout of a child process or a
local stream socket; requests on one connection are serialized.
"""

from __future__ import annotations

import os
import select
import socket
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyFunction, ScorerProtocolError, ScorerUnavailable
from .encoder import FunctionPrediction
from .normalize import FunctionSentence

_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ScorerEndpoint:
    """Where the scorer lives: a command line or a (host, port) address."""

    command: Sequence[str] | None = None
    address: tuple[str, int] | None = None
    timeout: float = 5.0

    def __post_init__(self) -> None:
        if (self.command is None) == (self.address is None):
            raise ValueError("configure exactly one of command or address")


def parse_score_line(line: str) -> FunctionPrediction:
    """Validate one response line as a two-class probability distribution."""
    parts = line.split()
    if len(parts) != 2:
        raise ScorerProtocolError(f"expected two fields, got {line!r}")
    try:
        p_benign, p_malicious = (float(p) for p in parts)
    except ValueError:
        raise ScorerProtocolError(f"non-numeric response {line!r}") from None
    if not (0.0 <= p_benign <= 1.0 and 0.0 <= p_malicious <= 1.0):
        raise ScorerProtocolError(f"probabilities out of range in {line!r}")
    if abs(p_benign + p_malicious - 1.0) > _SUM_TOLERANCE:
        raise ScorerProtocolError(f"not a distribution: {line!r}")
    return FunctionPrediction(p_benign, p_malicious)


class ExternalScorer:
    """Drop-in replacement for the built-in classifier's scoring interface."""

    def __init__(self, endpoint: ScorerEndpoint):
        self.endpoint = endpoint
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._sock_buffer = b""

    # transport -----------------------------------------------------------

    def _ensure_started(self) -> None:
        if self.endpoint.command is not None:
            if self._proc is None or self._proc.poll() is not None:
                try:
                    self._proc = subprocess.Popen(
                        list(self.endpoint.command),
                        stdin=subprocess.PIPE,
                        stdout=subprocess.PIPE,
                        text=True,
                        bufsize=1,
                    )
                except OSError as exc:
                    raise ScorerUnavailable(f"cannot start scorer: {exc}") from exc
        elif self._sock is None:
            try:
                self._sock = socket.create_connection(
                    self.endpoint.address, timeout=self.endpoint.timeout
                )
            except OSError as exc:
                raise ScorerUnavailable(f"cannot connect to scorer: {exc}") from exc

    def _roundtrip_process(self, request: str) -> str:
        proc = self._proc
        assert proc is not None and proc.stdin is not None and proc.stdout is not None
        try:
            proc.stdin.write(request + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerUnavailable(f"scorer process went away: {exc}") from exc
        deadline = time.monotonic() + self.endpoint.timeout
        fd = proc.stdout.fileno()
        buf = b""
        while b"\n" not in buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ScorerUnavailable("scorer response timed out")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise ScorerUnavailable("scorer response timed out")
            chunk = os.read(fd, 4096)
            if not chunk:
                raise ScorerUnavailable("scorer closed its output")
            buf += chunk
        return buf.split(b"\n", 1)[0].decode("utf-8", "replace")

    def _roundtrip_socket(self, request: str) -> str:
        sock = self._sock
        assert sock is not None
        try:
            sock.sendall((request + "\n").encode("utf-8"))
            while b"\n" not in self._sock_buffer:
                chunk = sock.recv(4096)
                if not chunk:
                    raise ScorerUnavailable("scorer closed the connection")
                self._sock_buffer += chunk
        except socket.timeout as exc:
            raise ScorerUnavailable("scorer response timed out") from exc
        except OSError as exc:
            raise ScorerUnavailable(f"scorer connection failed: {exc}") from exc
        line, self._sock_buffer = self._sock_buffer.split(b"\n", 1)
        return line.decode("utf-8", "replace")

    # scoring interface ----------------------------------------------------

    def classify_words(self, words) -> FunctionPrediction:
        if isinstance(words, FunctionSentence):
            words = words.words
        words = list(words)
        if not words:
            raise EmptyFunction("cannot score an empty sentence")
        request = " ".join(words)
        with self._lock:
            self._ensure_started()
            if self.endpoint.command is not None:
                line = self._roundtrip_process(request)
            else:
                line = self._roundtrip_socket(request)
        return parse_score_line(line)

    def classify_batch(self, sentences) -> list[FunctionPrediction]:
        return [self.classify_words(s) for s in sentences]

    def close(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self) -> "ExternalScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def external_scorer(endpoint: ScorerEndpoint) -> ExternalScorer:
    """Build a classifier-compatible adapter for a scorer endpoint."""
    return ExternalScorer(endpoint)

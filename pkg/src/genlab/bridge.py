"""External-agent bridge over a line-delimited JSON protocol.

One child process per agent instance, one session per episode. The harness
writes one JSON object per line on the child's stdin and reads one per line
from its stdout:

  harness -> agent:
    {"type": "reset", "task_interface": {...}, "budget": {...}, "seed": int}
    {"type": "observe", "payload": <observation>, "step": int}
  agent -> harness (per observe, confidence optional and at most one):
    {"type": "confidence", "value": <float in [0,1]>}
    {"type": "act", "payload": <action>}

Action payloads are plain strings for text and chain families; tool-family
actions are {"type": "tool", "query": str} or {"type": "answer", "value": str}.
Any protocol violation (bad JSON, unexpected type, EOF, timeout, message-count
overrun) is converted into a flagged zero-score episode, never a crash.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading
import queue
from typing import Any, Mapping

from .core import AgentHandle, _BridgeProtocolSignal
from .errors import BridgeSpawnError

_READ_TIMEOUT_SECONDS = 15.0


class _BridgeSession:
    def __init__(self, command: str, timeout_steps: int):
        self.command = command
        self.timeout_steps = timeout_steps
        try:
            self.process = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeSpawnError(f"could not spawn {command!r}: {exc}") from exc
        self.lines: "queue.Queue[str | None]" = queue.Queue()
        self.reader = threading.Thread(target=self._pump, daemon=True)
        self.reader.start()
        self.messages_this_episode = 0
        self.last_confidence: float = 0.5

    def _pump(self) -> None:
        assert self.process.stdout is not None
        for line in self.process.stdout:
            self.lines.put(line)
        self.lines.put(None)

    def send(self, message: Mapping[str, Any]) -> None:
        if self.process.poll() is not None or self.process.stdin is None:
            raise _BridgeProtocolSignal("agent process exited")
        try:
            self.process.stdin.write(json.dumps(message, sort_keys=True) + "\n")
            self.process.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise _BridgeProtocolSignal(f"write to agent failed: {exc}") from exc

    def recv(self) -> Mapping[str, Any]:
        self.messages_this_episode += 1
        if self.messages_this_episode > self.timeout_steps:
            raise _BridgeProtocolSignal(
                f"agent exceeded {self.timeout_steps} protocol messages in one episode"
            )
        try:
            line = self.lines.get(timeout=_READ_TIMEOUT_SECONDS)
        except queue.Empty:
            raise _BridgeProtocolSignal("timed out waiting for agent message") from None
        if line is None:
            raise _BridgeProtocolSignal("agent closed its output stream")
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise _BridgeProtocolSignal(f"agent sent invalid JSON: {line!r}") from exc
        if not isinstance(message, dict) or "type" not in message:
            raise _BridgeProtocolSignal(f"agent message lacks a type: {line!r}")
        return message

    def close(self) -> None:
        if self.process.poll() is None:
            try:
                self.process.terminate()
                self.process.wait(timeout=5)
            except Exception:
                self.process.kill()


def _decode_action(payload: Any) -> Any:
    if isinstance(payload, Mapping):
        if payload.get("type") == "tool":
            return ("tool", str(payload.get("query", "")))
        if payload.get("type") == "answer":
            return ("answer", str(payload.get("value", "")))
        raise _BridgeProtocolSignal(f"unrecognized action payload: {payload!r}")
    if isinstance(payload, str):
        return payload
    raise _BridgeProtocolSignal(f"unrecognized action payload: {payload!r}")


def bridge_agent(command: str, timeout_steps: int = 1000) -> AgentHandle:
    """Wrap a child process speaking the line protocol as an agent handle.

    `timeout_steps` caps protocol messages per episode; a fixed wall-clock
    guard per message protects against hung processes. Bridged agents are
    single-session: evaluators must not run them in parallel.
    """
    session = _BridgeSession(command, timeout_steps)

    def begin_episode(context: Mapping[str, Any], seed: int) -> None:
        session.messages_this_episode = 0
        session.last_confidence = 0.5
        try:
            session.send(
                {
                    "type": "reset",
                    "task_interface": {
                        "kind": context["kind"],
                        "interface": context["interface"],
                        "horizon": context["horizon"],
                        "params": context["params"],
                    },
                    "budget": context.get("budget", {}),
                    "seed": seed,
                }
            )
        except _BridgeProtocolSignal:
            pass  # surfaced on the first policy call instead

    def policy(state: Any, context: Mapping[str, Any], history: list) -> Mapping[Any, float]:
        obs = history[-1][0]
        step = len(history) - 1
        session.send({"type": "observe", "payload": obs, "step": step})
        while True:
            message = session.recv()
            if message["type"] == "confidence":
                try:
                    session.last_confidence = min(1.0, max(0.0, float(message["value"])))
                except (KeyError, TypeError, ValueError):
                    raise _BridgeProtocolSignal(f"bad confidence message: {message!r}") from None
                continue
            if message["type"] == "act":
                return {_decode_action(message.get("payload")): 1.0}
            raise _BridgeProtocolSignal(f"unexpected agent message type: {message['type']!r}")

    def confidence(state: Any, context: Mapping[str, Any]) -> float:
        return session.last_confidence

    handle = AgentHandle(
        id=f"bridge({command})",
        policy=policy,
        state=None,
        confidence=confidence,
        interface=None,
        deterministic=False,
        kind="stdio-bridge",
        params={"command": command, "timeout_steps": timeout_steps},
        begin_episode=begin_episode,
        external=True,
    )
    handle.params = dict(handle.params)
    handle.params["session"] = session
    return handle


def close_bridge(handle: AgentHandle) -> None:
    session = handle.params.get("session")
    if isinstance(session, _BridgeSession):
        session.close()

"""Local-process backend: really runs the command pair on this machine.

Commands execute through the platform shell inside an isolated working
directory. Files the run leaves under the designated output directory become
the outcome's output references. Used for smoke tests and desk-scale runs;
cluster semantics live in the simulator.
"""

from __future__ import annotations

import os
import signal
import subprocess
import threading
import time
from pathlib import Path
from typing import Mapping, Optional

from ..errors import CommandTimeout, RunFailed, SetupFailed
from ..workflow import ExecutablePlan
from .base import ExecutionOutcome, ExitStatus

OUTPUT_DIRNAME = "outputs"
DEFAULT_TIMEOUT_SECONDS = 3600.0


def _signal_group(proc: subprocess.Popen, sig: int):
    try:
        os.killpg(os.getpgid(proc.pid), sig)
    except (ProcessLookupError, PermissionError):
        proc.kill()


class LocalRunner:
    """Stage-wise command runner with cooperative cancellation."""

    def __init__(self, workdir, timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
                 env: Optional[Mapping[str, str]] = None):
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.output_dir = self.workdir / OUTPUT_DIRNAME
        self.output_dir.mkdir(exist_ok=True)
        self.timeout_seconds = timeout_seconds
        self.env = dict(os.environ)
        if env:
            self.env.update(env)
        self.env["STRATUS_OUTPUT_DIR"] = str(self.output_dir)
        self._proc: Optional[subprocess.Popen] = None
        self._lock = threading.Lock()
        self.cancelled = False

    def run_stage(self, command: str, stage: str) -> tuple[float, str]:
        """Run one command; returns (elapsed_seconds, log_text)."""
        if not command or not command.strip():
            raise ValueError(f"{stage} command must be a non-empty string")
        started = time.perf_counter()
        # own process group, so cancellation reaches the shell's children too
        proc = subprocess.Popen(
            command, shell=True, cwd=self.workdir, env=self.env,
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
            start_new_session=True)
        with self._lock:
            if self.cancelled:
                _signal_group(proc, signal.SIGKILL)
                proc.wait()
                return (time.perf_counter() - started, f"[{stage}] cancelled before start\n")
            self._proc = proc
        try:
            out, _ = proc.communicate(timeout=self.timeout_seconds)
        except subprocess.TimeoutExpired:
            _signal_group(proc, signal.SIGKILL)
            out, _ = proc.communicate()
            raise CommandTimeout(
                f"{stage} command exceeded {self.timeout_seconds:g} s",
                log_text=out or "")
        finally:
            with self._lock:
                self._proc = None
        elapsed = time.perf_counter() - started
        log = out or ""
        if self.cancelled:
            return (elapsed, log)
        if proc.returncode != 0:
            exc = SetupFailed if stage == "setup" else RunFailed
            raise exc(f"{stage} command exited with status {proc.returncode}",
                      status=proc.returncode, log_text=log)
        return (elapsed, log)

    def cancel(self):
        with self._lock:
            self.cancelled = True
            if self._proc is not None and self._proc.poll() is None:
                _signal_group(self._proc, signal.SIGTERM)

    def collect_outputs(self) -> tuple[str, ...]:
        refs = []
        for path in sorted(self.output_dir.rglob("*")):
            if path.is_file():
                refs.append(str(path.relative_to(self.output_dir)))
        return tuple(refs)


def local_execute(plan: ExecutablePlan, workdir,
                  timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS,
                  env: Optional[Mapping[str, str]] = None) -> ExecutionOutcome:
    """Run setup (if any) then the run command; capture combined output.

    Raises SetupFailed / RunFailed on nonzero exit (log attached) and
    CommandTimeout when the configured limit is exceeded.
    """
    runner = LocalRunner(workdir, timeout_seconds=timeout_seconds, env=env)
    log_parts = []
    elapsed = 0.0
    if plan.setup is not None:
        setup_elapsed, setup_log = runner.run_stage(plan.setup, "setup")
        elapsed += setup_elapsed
        log_parts.append(setup_log)
    run_elapsed, run_log = runner.run_stage(plan.run, "run")
    elapsed += run_elapsed
    log_parts.append(run_log)
    return ExecutionOutcome(
        wall_time_hours=max(elapsed, 1e-9) / 3600.0,
        exit_status=ExitStatus.SUCCESS,
        log_text="".join(log_parts),
        output_refs=runner.collect_outputs(),
    )

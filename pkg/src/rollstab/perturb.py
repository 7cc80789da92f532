"""Noise generators, the model-adapter contract, perturbed-vs-clean rollout
comparisons, and ensemble spread.

Adapters advance a multi-variable state (n_var, lat, lon) one step given a
clock; the rollout loop feeds each output back as the next input.
Perturbations apply to the initial state only: additive white noise,
additive Gaussian random fields with a prescribed correlation length,
replacement by pure noise with the reference's scalar (mu, sigma), or
replacement by an arbitrary image rescaled to (mu, sigma).
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .gridio import (
    GridSpec,
    RolloutSeries,
    cell_weights,
    read_rollout,
    write_rollout,
)
from .synth import RegimeConfig, _Stepper, _step_core, initial_state

KINDS = ("WHITE", "GRF", "PURE_NOISE", "IMAGE_INIT")
TARGETS = ("dynamic", "static", "both")


@dataclass(frozen=True)
class PerturbationSpec:
    """What to do to the initial state before rolling out."""

    kind: str
    k: float = 1.0  # amplitude in units of the variable's sigma
    correlation_length: float = 10.0  # pixels, GRF only
    target: str = "dynamic"
    time_shift_days: float | None = None
    image: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.k <= 0:
            raise ValueError("amplitude multiplier k must be > 0")
        if self.correlation_length < 1:
            raise ValueError("correlation length must be >= 1 pixel")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if self.kind == "IMAGE_INIT" and self.image is None:
            raise ValueError("IMAGE_INIT requires an image array")


def variable_stats(reference: RolloutSeries, v: str) -> tuple[float, float]:
    """Scalar mean and std of a variable pooled over all pixels and steps."""
    vals = reference.values(v)
    return float(vals.mean()), float(vals.std())


def gaussian_random_field(shape: tuple[int, int], correlation_length: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Unit-std Gaussian random field with isotropic Gaussian correlation.

    Synthesised spectrally: white noise shaped by a Gaussian kernel in
    wavenumber space so the autocorrelation is exp(-r^2 / (2 L^2)); both
    axes are treated as periodic.
    """
    ky = 2.0 * np.pi * np.fft.fftfreq(shape[0])
    kx = 2.0 * np.pi * np.fft.fftfreq(shape[1])
    k2 = ky[:, None] ** 2 + kx[None, :] ** 2
    kernel = np.exp(-k2 * correlation_length**2 / 4.0)
    white = rng.standard_normal(shape)
    fld = np.fft.ifft2(np.fft.fft2(white) * kernel).real
    fld -= fld.mean()
    sd = fld.std()
    if sd == 0:
        raise ValueError("degenerate random field (zero variance)")
    return fld / sd


def apply_perturbation(
    state: np.ndarray,
    spec: PerturbationSpec,
    stats: dict[str, tuple[float, float]],
    variables: tuple[str, ...],
    static_variables: tuple[str, ...] = (),
) -> np.ndarray:
    """Perturb the targeted variables of one (n_var, lat, lon) state."""
    state = np.array(state, dtype=np.float64, copy=True)
    if state.ndim != 3 or state.shape[0] != len(variables):
        raise ValueError("state must be (n_var, lat, lon) matching the variable list")
    statics = set(static_variables)
    if spec.target == "dynamic":
        targeted = [v for v in variables if v not in statics]
    elif spec.target == "static":
        targeted = [v for v in variables if v in statics]
    else:
        targeted = list(variables)
    missing = [v for v in targeted if v not in stats]
    if missing:
        raise ValueError(f"missing (mu, sigma) stats for variables: {missing}")

    rng = np.random.default_rng(spec.seed)
    shape = state.shape[1:]
    for v in targeted:
        vi = variables.index(v)
        mu, sigma = stats[v]
        if spec.kind == "WHITE":
            state[vi] += rng.normal(0.0, spec.k * sigma, shape)
        elif spec.kind == "GRF":
            fld = gaussian_random_field(shape, spec.correlation_length, rng)
            state[vi] += spec.k * sigma * fld
        elif spec.kind == "PURE_NOISE":
            state[vi] = rng.normal(mu, sigma, shape)
        elif spec.kind == "IMAGE_INIT":
            img = np.asarray(spec.image, dtype=np.float64)
            if img.shape != shape:
                raise ValueError(
                    f"image shape {img.shape} does not match state fields {shape}"
                )
            sd = img.std()
            if sd == 0:
                state[vi] = np.full(shape, mu)
            else:
                state[vi] = (img - img.mean()) / sd * sigma + mu
    return state


# ---------------------------------------------------------------------------
# adapters


class ModelAdapter:
    """Contract for anything that can advance a state by one step.

    Implementations define ``variables`` (dynamic), ``static_variables``,
    ``grid``, ``supports_time_shift``, and ``step(state, clock)``. The state
    covers dynamic then static variables along its first axis; adapters must
    return the same shape.
    """

    variables: tuple[str, ...] = ()
    static_variables: tuple[str, ...] = ()
    supports_time_shift: bool = False
    grid: GridSpec

    @property
    def all_variables(self) -> tuple[str, ...]:
        return tuple(self.variables) + tuple(self.static_variables)

    def step(self, state: np.ndarray, clock: datetime) -> np.ndarray:
        raise NotImplementedError


class SynthAdapter(ModelAdapter):
    """Adapter around the synthetic generator; statics pass through."""

    supports_time_shift = True

    def __init__(self, cfg: RegimeConfig, static_variables: tuple[str, ...] = (),
                 step_seconds: int = 21600):
        self.cfg = cfg
        self.variables = tuple(cfg.variables)
        self.static_variables = tuple(static_variables)
        self.grid = cfg.grid
        self.step_seconds = step_seconds
        self._stepper = _Stepper(cfg)

    def step(self, state: np.ndarray, clock: datetime) -> np.ndarray:
        out = np.array(state, dtype=np.float64, copy=True)
        for vi in range(len(self.variables)):
            out[vi] = _step_core(self._stepper, out[vi], clock, self.step_seconds, vi)
        return out

    def initial_state(self) -> np.ndarray:
        fields = [initial_state(self.cfg, vi) for vi in range(len(self.variables))]
        fields += [np.zeros((self.grid.n_lat, self.grid.n_lon))
                   for _ in self.static_variables]
        return np.stack(fields)


class ExternalProcessAdapter(ModelAdapter):
    """Drives an external model via files in a work directory.

    Per step the harness writes ``state_in.rgf`` (a one-step rollout holding
    all variables) and ``clock.json``, invokes the configured command, and
    reads ``state_out.rgf`` back. The manifest is a JSON object with keys
    ``command`` (string or argv list), ``workdir``, ``variables``, and
    optionally ``static_variables`` and ``supports_time_shift``.
    """

    def __init__(self, manifest, grid: GridSpec, step_seconds: int = 21600):
        if isinstance(manifest, (str, Path)):
            with open(manifest) as f:
                manifest = json.load(f)
        cmd = manifest["command"]
        self.command = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self.workdir = Path(manifest["workdir"])
        self.variables = tuple(manifest["variables"])
        self.static_variables = tuple(manifest.get("static_variables", ()))
        self.supports_time_shift = bool(manifest.get("supports_time_shift", False))
        self.grid = grid
        self.step_seconds = step_seconds

    def step(self, state: np.ndarray, clock: datetime) -> np.ndarray:
        self.workdir.mkdir(parents=True, exist_ok=True)
        snap = RolloutSeries(
            grid=self.grid,
            variables=self.all_variables,
            start_time=clock,
            data=np.asarray(state, dtype=np.float32)[None],
            step_seconds=self.step_seconds,
        )
        write_rollout(snap, self.workdir / "state_in.rgf")
        with open(self.workdir / "clock.json", "w") as f:
            json.dump({"time": clock.isoformat(), "step_seconds": self.step_seconds},
                      f, sort_keys=True)
        subprocess.run(self.command, cwd=self.workdir, check=True)
        out = read_rollout(self.workdir / "state_out.rgf")
        if out.data.shape[1:] != state.shape:
            raise ValueError("external adapter returned mismatched state dimensions")
        return out.data[0].astype(np.float64)


# ---------------------------------------------------------------------------
# rollout loop and comparisons


def run_rollout(
    adapter: ModelAdapter,
    init_state: np.ndarray,
    start_time: datetime,
    n_steps: int,
    spec: PerturbationSpec | None = None,
    stats: dict[str, tuple[float, float]] | None = None,
    step_seconds: int = 21600,
) -> RolloutSeries:
    """Feed the adapter its own output for ``n_steps`` steps.

    The perturbation (if any) applies to the initial state only. With
    ``time_shift_days`` set, the clock handed to the adapter is offset while
    output timestamps stay physical; adapters that do not support shifting
    reject the spec. On adapter failure the completed steps are returned
    with an ``error`` annotation in ``attrs``.
    """
    state = np.asarray(init_state, dtype=np.float64)
    n_all = len(adapter.all_variables)
    if state.shape != (n_all, adapter.grid.n_lat, adapter.grid.n_lon):
        raise ValueError("initial state does not match adapter variables and grid")
    shift = timedelta(0)
    if spec is not None:
        if spec.time_shift_days is not None:
            if not adapter.supports_time_shift:
                raise ValueError("adapter does not support time shifting")
            shift = timedelta(days=spec.time_shift_days)
        if stats is None:
            raise ValueError("perturbation requires per-variable (mu, sigma) stats")
        state = apply_perturbation(state, spec, stats, adapter.all_variables,
                                   adapter.static_variables)

    frames = [state.astype(np.float32)]
    attrs: dict = {}
    if spec is not None:
        attrs["perturbation"] = {
            "kind": spec.kind, "k": spec.k, "target": spec.target, "seed": spec.seed,
            "time_shift_days": spec.time_shift_days,
        }
    clock = start_time
    for i in range(n_steps):
        try:
            state = adapter.step(state, clock + shift)
        except Exception as e:  # partial series with annotation
            attrs["error"] = f"adapter failed at step {i}: {e}"
            break
        if not np.isfinite(state).all():
            attrs["error"] = f"adapter produced non-finite fields at step {i}"
            break
        clock = clock + timedelta(seconds=step_seconds)
        frames.append(np.asarray(state, dtype=np.float32))
    return RolloutSeries(
        grid=adapter.grid,
        variables=adapter.all_variables,
        start_time=start_time,
        data=np.stack(frames),
        step_seconds=step_seconds,
        attrs=attrs,
    )


def error_trajectory(clean: RolloutSeries, perturbed: RolloutSeries, v: str) -> np.ndarray:
    """Latitude-weighted RMSE between two rollouts per timestep."""
    if not clean.grid.same_geometry(perturbed.grid):
        raise ValueError("rollouts live on different grids")
    if clean.n_time != perturbed.n_time:
        raise ValueError("rollouts have different lengths")
    a = clean.values(v).astype(np.float64)
    b = perturbed.values(v).astype(np.float64)
    w = cell_weights(clean.grid)
    return np.sqrt(((a - b) ** 2 * w).sum(axis=(1, 2)))


def ensemble_spread(rollouts: list[RolloutSeries], v: str) -> tuple[np.ndarray, np.ndarray]:
    """Pixelwise sample std across members: (lat-weighted mean, max) series."""
    if len(rollouts) < 2:
        raise ValueError("ensemble spread requires at least two members")
    first = rollouts[0]
    stack = []
    for r in rollouts:
        if not r.grid.same_geometry(first.grid) or r.n_time != first.n_time:
            raise ValueError("ensemble members must share grid and length")
        stack.append(r.values(v).astype(np.float64))
    std = np.stack(stack).std(axis=0, ddof=1)  # (time, lat, lon)
    w = cell_weights(first.grid)
    return (std * w).sum(axis=(1, 2)), std.max(axis=(1, 2))

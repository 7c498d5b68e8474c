"""Coarse-to-fine separation solver.

The solver maintains four states: the transmission and reflection image
estimates and their feature maps under two convolutional dictionaries. One
layer performs, in order,

    (1) a proximal gradient step on the transmission features,
    (2) the same on the reflection features,
    (3) a gradient step on the transmission image followed by the wavelet
        exclusion prox against the current reflection estimate,
    (4) a gradient step on the reflection image followed by the exclusion
        prox against the just-updated transmission estimate.

Scales run coarse to fine: the input is repeatedly halved, the coarsest
level is initialized from the input itself, and each finer level starts
from the upsampled results of the previous one. Every executed layer is
recorded in an iteration trace whose rows can be exported as CSV.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dictionary import (
    ConvDictionary,
    dct_dictionary,
    decode,
    encode_adjoint,
    grad_f,
    grad_h,
    lipschitz_estimate,
    random_dictionary,
)
from .errors import DimensionError, DivergenceError
from .metrics import exclusion_transform, psnr
from .operators import _check_image, resize_bilinear
from .prox import prox_exclusion, prox_feature
from .wavelet import WaveletBank, haar_bank

OBJECTIVE_SLACK = 1e-8
TRACE_HEADER = "scale,layer,objective,fidelity,couple_t,couple_r,sparsity,exclusion,psnr_t,psnr_r"
_LIP_PROBE = (32, 32)
_LIP_ITERS = 30


@dataclass
class SolverConfig:
    """Run parameters; every field has a CLI flag of the same name."""

    scales: int = 4
    layers: int = 2
    atoms: int = 16
    kernel: int = 7
    tau: float = 0.6
    tau_growth: float = 1.0
    kappa: float = 0.1
    lambda_t: float = 0.02
    lambda_r: float = 0.02
    eta1: float = 0.02
    eta2: float = 0.02
    eta3: float = 0.5
    eta4: float = 0.5
    auto_step: bool = True
    dict_kind: str = "dct"
    r_init: str = "zero"
    coupled_r_grad: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.scales < 1:
            raise ValueError("scales must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.atoms < 1:
            raise ValueError("atoms must be >= 1")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel must be odd and positive")
        if self.atoms > self.kernel**2:
            raise ValueError(
                f"capacity exceeded: {self.atoms} atoms > kernel^2 = {self.kernel ** 2}"
            )
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.tau_growth < 1.0:
            raise ValueError("tau_growth must be >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.lambda_t < 0 or self.lambda_r < 0:
            raise ValueError("sparsity weights must be nonnegative")
        for name in ("eta1", "eta2", "eta3", "eta4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.dict_kind not in ("dct", "random"):
            raise ValueError(f"dict_kind must be 'dct' or 'random', got {self.dict_kind!r}")
        if self.r_init not in ("zero", "half"):
            raise ValueError(f"r_init must be 'zero' or 'half', got {self.r_init!r}")

    @classmethod
    def desk_profile(cls, **overrides) -> "SolverConfig":
        """Small fast profile used throughout the test suite."""
        base = dict(scales=2, layers=2, atoms=16, kernel=7)
        base.update(overrides)
        return cls(**base)


@dataclass
class SolverState:
    """Working estimates at one scale; images (H, W, C), features (H, W, N)."""

    t_hat: np.ndarray
    r_hat: np.ndarray
    z_t: np.ndarray
    z_r: np.ndarray


@dataclass(frozen=True)
class StepSizes:
    eta1: float
    eta2: float
    eta3: float
    eta4: float
    lip_t: float
    lip_r: float


@dataclass
class ObjectiveTerms:
    """Weighted contributions; ``total`` is their sum."""

    fidelity: float
    couple_t: float
    couple_r: float
    sparsity_t: float
    sparsity_r: float
    exclusion: float

    @property
    def total(self) -> float:
        return (
            self.fidelity
            + self.couple_t
            + self.couple_r
            + self.sparsity_t
            + self.sparsity_r
            + self.exclusion
        )


@dataclass
class TraceRow:
    scale: int
    layer: int
    objective: float
    fidelity: float
    couple_t: float
    couple_r: float
    sparsity: float
    exclusion: float
    psnr_t: Optional[float] = None
    psnr_r: Optional[float] = None


@dataclass
class IterationTrace:
    rows: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_csv(self) -> str:
        def fmt(v):
            return "" if v is None else f"{v:.12g}"

        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        for r in self.rows:
            buf.write(
                f"{r.scale},{r.layer},{fmt(r.objective)},{fmt(r.fidelity)},"
                f"{fmt(r.couple_t)},{fmt(r.couple_r)},{fmt(r.sparsity)},"
                f"{fmt(r.exclusion)},{fmt(r.psnr_t)},{fmt(r.psnr_r)}\n"
            )
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def build_dictionaries(cfg: SolverConfig, channels: int):
    """Transmission and reflection dictionaries per the config."""
    if cfg.dict_kind == "dct":
        d = dct_dictionary(cfg.atoms, cfg.kernel, channels)
        return d, d
    return (
        random_dictionary(cfg.atoms, cfg.kernel, channels, seed=cfg.seed),
        random_dictionary(cfg.atoms, cfg.kernel, channels, seed=cfg.seed + 1),
    )


def resolve_steps(cfg: SolverConfig, dicts) -> StepSizes:
    """Fix the four step sizes, via power iteration when auto_step is on.

    eta1/eta2 become 0.9 over the feature operator's largest eigenvalue and
    eta3/eta4 become 0.9 / (1 + tau); with auto_step off the config values
    are used verbatim. The eigenvalue estimates ride along for diagnostics.
    """
    d_t, d_r = dicts
    lip_t = lipschitz_estimate(d_t, _LIP_PROBE, iters=_LIP_ITERS, seed=cfg.seed)
    lip_r = lipschitz_estimate(d_r, _LIP_PROBE, iters=_LIP_ITERS, seed=cfg.seed + 1)
    if cfg.auto_step:
        eta1 = 0.9 / max(lip_t, 1e-12)
        eta2 = 0.9 / max(lip_r, 1e-12)
        eta3 = eta4 = 0.9 / (1.0 + cfg.tau)
    else:
        eta1, eta2, eta3, eta4 = cfg.eta1, cfg.eta2, cfg.eta3, cfg.eta4
    return StepSizes(eta1, eta2, eta3, eta4, lip_t, lip_r)


def objective(
    state: SolverState,
    image: np.ndarray,
    cfg: SolverConfig,
    dicts,
    bank: WaveletBank,
    tau: Optional[float] = None,
) -> ObjectiveTerms:
    """Evaluate every term of the splitting objective at the current state."""
    d_t, d_r = dicts
    tau = cfg.tau if tau is None else tau
    dec_t = decode(d_t, state.z_t)
    dec_r = decode(d_r, state.z_r)
    return ObjectiveTerms(
        fidelity=0.5 * float(np.sum((image - state.t_hat - state.r_hat) ** 2)),
        couple_t=0.5 * tau * float(np.sum((state.t_hat - dec_t) ** 2)),
        couple_r=0.5 * tau * float(np.sum((state.r_hat - dec_r) ** 2)),
        sparsity_t=cfg.lambda_t * float(np.sum(np.abs(state.z_t))),
        sparsity_r=cfg.lambda_r * float(np.sum(np.abs(state.z_r))),
        exclusion=cfg.kappa * exclusion_transform(state.t_hat, state.r_hat, bank),
    )


def _check_finite(arr, stage, scale, layer):
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(stage, scale, layer)


def feature_step(z, target, d, eta: float, theta: float, grad=grad_f) -> np.ndarray:
    """One prox-gradient step pulling a feature map toward coding its target."""
    return prox_feature(z - eta * grad(z, target, d), eta * theta)


def image_step(current, other, code, image, eta: float, tau: float,
               kappa: float, bank: WaveletBank) -> np.ndarray:
    """Gradient step on one image estimate, then the exclusion prox.

    The same map serves both estimates: the transmission update passes
    (t_hat, r_hat) and the reflection update passes (r_hat, t_hat), which is
    the role symmetry between the two image update rules.
    """
    resid = image - current - other
    moved = current + eta * (resid - tau * (current - code))
    return prox_exclusion(moved, other, kappa, bank)


def separation_layer(
    state: SolverState,
    image: np.ndarray,
    cfg: SolverConfig,
    dicts,
    bank: WaveletBank,
    steps: StepSizes,
    tau: Optional[float] = None,
    scale: int = 0,
    layer: int = 0,
) -> SolverState:
    """Run the four sequential updates once and return the new state."""
    d_t, d_r = dicts
    tau = cfg.tau if tau is None else tau

    z_t = feature_step(state.z_t, state.t_hat, d_t, steps.eta1,
                       cfg.lambda_t / tau, grad_f)
    _check_finite(z_t, "transmission feature update", scale, layer)

    r_target = state.r_hat - state.t_hat if cfg.coupled_r_grad else state.r_hat
    z_r = feature_step(state.z_r, r_target, d_r, steps.eta2,
                       cfg.lambda_r / tau, grad_h)
    _check_finite(z_r, "reflection feature update", scale, layer)

    t_hat = image_step(state.t_hat, state.r_hat, decode(d_t, z_t), image,
                       steps.eta3, tau, cfg.kappa, bank)
    _check_finite(t_hat, "transmission image update", scale, layer)

    r_hat = image_step(state.r_hat, t_hat, decode(d_r, z_r), image,
                       steps.eta4, tau, cfg.kappa, bank)
    _check_finite(r_hat, "reflection image update", scale, layer)

    return SolverState(t_hat=t_hat, r_hat=r_hat, z_t=z_t, z_r=z_r)


def solve_scale(
    state: SolverState,
    image: np.ndarray,
    cfg: SolverConfig,
    dicts,
    bank: WaveletBank,
    steps: StepSizes,
    scale: int,
    trace: IterationTrace,
    truth=None,
) -> SolverState:
    """Run the configured number of layers at one scale, tracing each."""
    prev = objective(state, image, cfg, dicts, bank).total
    for layer in range(1, cfg.layers + 1):
        tau_eff = cfg.tau * cfg.tau_growth ** (layer - 1)
        state = separation_layer(
            state, image, cfg, dicts, bank, steps,
            tau=tau_eff, scale=scale, layer=layer,
        )
        terms = objective(state, image, cfg, dicts, bank, tau=tau_eff)
        total = terms.total
        if cfg.tau_growth == 1.0 and total > prev + OBJECTIVE_SLACK:
            trace.warnings.append(
                f"objective increased at scale {scale} layer {layer}: "
                f"{prev:.9g} -> {total:.9g}"
            )
        prev = total
        psnr_t = psnr_r = None
        if truth is not None:
            psnr_t = psnr(state.t_hat, truth[0])
            psnr_r = psnr(state.r_hat, truth[1])
        trace.rows.append(
            TraceRow(
                scale=scale,
                layer=layer,
                objective=total,
                fidelity=terms.fidelity,
                couple_t=terms.couple_t,
                couple_r=terms.couple_r,
                sparsity=terms.sparsity_t + terms.sparsity_r,
                exclusion=terms.exclusion,
                psnr_t=psnr_t,
                psnr_r=psnr_r,
            )
        )
    return state


def _match_size(arr: np.ndarray, h: int, w: int) -> np.ndarray:
    if arr.shape[0] < h or arr.shape[1] < w:
        raise DimensionError(
            f"upsampled state {arr.shape[:2]} smaller than target {(h, w)}"
        )
    return arr[:h, :w]


def _encode_init(d, image: np.ndarray) -> np.ndarray:
    """Adjoint encoding rescaled so the decoded code matches the image.

    The raw adjoint inflates amplitudes by the dictionary operator norm,
    which the single prox-gradient step per layer cannot undo; the least
    squares scalar keeps the coupling terms at image scale from the start.
    """
    z = encode_adjoint(d, image)
    decoded = decode(d, z)
    denom = float(np.sum(decoded * decoded))
    if denom <= 0.0:
        return np.zeros_like(z)
    alpha = float(np.sum(decoded * image)) / denom
    return alpha * z


def solve(image, cfg: SolverConfig, dicts=None, bank=None, ground_truth=None):
    """Separate an image into transmission and reflection estimates.

    Args:
        image: (H, W, C) float array with values in [0, 1].
        cfg: solver configuration.
        dicts: optional (transmission, reflection) dictionary pair; built
            from the config when omitted.
        bank: optional wavelet bank; the Haar bank when omitted.
        ground_truth: optional (t, r) pair at full resolution; when given,
            trace rows carry PSNR against it at the working scale.

    Returns:
        (t_hat, r_hat, trace) with both estimates clipped to [0, 1].
    """
    image = _check_image(image, "input")
    if image.min() < -1e-9 or image.max() > 1 + 1e-9:
        raise ValueError("input values must lie in [0, 1]")
    if bank is None:
        bank = haar_bank()
    if dicts is None:
        dicts = build_dictionaries(cfg, image.shape[2])
    d_t, d_r = dicts
    if d_t.channels != image.shape[2] or d_r.channels != image.shape[2]:
        raise DimensionError(
            f"dictionary channels ({d_t.channels}, {d_r.channels}) "
            f"do not match image channels {image.shape[2]}"
        )

    levels = [image]
    for _ in range(cfg.scales - 1):
        prev = levels[-1]
        if min(prev.shape[0], prev.shape[1]) < 2:
            raise ValueError(
                f"scales={cfg.scales} is too deep for a {image.shape[0]}x{image.shape[1]} input"
            )
        levels.append(resize_bilinear(prev, 0.5))

    truths = None
    if ground_truth is not None:
        tt, rr = ground_truth
        truths = [(np.asarray(tt, dtype=np.float64), np.asarray(rr, dtype=np.float64))]
        if truths[0][0].shape != image.shape or truths[0][1].shape != image.shape:
            raise DimensionError("ground truth shapes must match the input")
        for _ in range(cfg.scales - 1):
            pt, pr = truths[-1]
            truths.append((resize_bilinear(pt, 0.5), resize_bilinear(pr, 0.5)))

    steps = resolve_steps(cfg, dicts)
    trace = IterationTrace()

    coarse = levels[-1]
    t_hat = coarse.copy()
    r_hat = np.zeros_like(coarse) if cfg.r_init == "zero" else 0.5 * coarse
    z_t = _encode_init(d_t, t_hat)
    z_r = _encode_init(d_r, r_hat)
    state = SolverState(t_hat=t_hat, r_hat=r_hat, z_t=z_t, z_r=z_r)

    for idx, s in enumerate(range(cfg.scales, 0, -1)):
        cur = levels[s - 1]
        if idx > 0:
            h, w = cur.shape[0], cur.shape[1]
            t_up = _match_size(resize_bilinear(state.t_hat, 2), h, w)
            r_up = _match_size(resize_bilinear(state.r_hat, 2), h, w)
            z_t = _match_size(resize_bilinear(state.z_t, 2), h, w)
            z_r = _match_size(resize_bilinear(state.z_r, 2), h, w)
            # One descent refinement so the upsampled codes re-fit the
            # upsampled images before layers resume.
            z_t = z_t - steps.eta1 * grad_f(z_t, t_up, d_t)
            r_target = r_up - t_up if cfg.coupled_r_grad else r_up
            z_r = z_r - steps.eta2 * grad_h(z_r, r_target, d_r)
            state = SolverState(t_hat=t_up, r_hat=r_up, z_t=z_t, z_r=z_r)
        truth_s = truths[s - 1] if truths is not None else None
        state = solve_scale(
            state, cur, cfg, dicts, bank, steps, scale=s, trace=trace, truth=truth_s
        )

    return np.clip(state.t_hat, 0.0, 1.0), np.clip(state.r_hat, 0.0, 1.0), trace


def separate(image, cfg: Optional[SolverConfig] = None, ground_truth=None):
    """Convenience wrapper building dictionaries and bank from the config."""
    if cfg is None:
        cfg = SolverConfig()
    return solve(image, cfg, ground_truth=ground_truth)

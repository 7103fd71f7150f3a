"""Finite-difference verification of the backward pass.

The checker compares analytic gradients against central differences on a
64-bit copy of the computation. Graphs must be built with ``dtype=float64``
and evaluated deterministically (dropout off): at 32-bit precision the
difference quotient loses too many digits to be a useful oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericError
from .layers import Graph
from .tensor import Tensor

LossFn = Callable[[], Tensor]


@dataclass
class ParameterReport:
    """Worst relative error observed over the sampled coordinates of one parameter."""

    name: str
    max_rel_error: float
    coords_checked: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


@dataclass
class GradCheckReport:
    """Per-parameter finite-difference comparison results."""

    h: float
    tolerance: float
    entries: list[ParameterReport] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e.passed(self.tolerance) for e in self.entries)

    def failures(self) -> list[ParameterReport]:
        return [e for e in self.entries if not e.passed(self.tolerance)]


def _relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-8)
    return abs(analytic - numeric) / denom


def grad_check(
    graph: Graph,
    loss_fn: LossFn,
    h: float = 1e-3,
    tolerance: float = 1e-2,
    samples_per_param: int = 8,
    seed: int = 0,
    fallback_h: float | tuple[float, ...] | None = None,
) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must re-run the forward pass on fixed inputs and return the
    scalar loss; it is evaluated twice up front and aborts the check if the
    two values differ (a non-deterministic graph cannot be checked). Up to
    ``samples_per_param`` coordinates are sampled per parameter.

    ``fallback_h`` lists extra step sizes tried (lazily) for a coordinate
    whose first estimate disagrees, keeping the best agreement. Finite-
    difference artifacts are step-sensitive (a coarse step can straddle a
    max-pool argmax switch; a fine step drowns near-zero gradients in
    float64 roundoff), while a genuinely wrong backward disagrees at every
    step, so the fallbacks filter artifacts without masking real defects.
    """
    if graph.dtype != np.float64:
        raise ConfigError("gradient checking requires a graph built with dtype=float64")
    if graph.training:
        raise ConfigError("gradient checking requires eval mode (dropout disabled)")

    first = float(loss_fn().data)
    second = float(loss_fn().data)
    if first != second:
        raise NumericError(
            f"loss is not deterministic under a fixed graph ({first!r} vs {second!r}); "
            "check aborted"
        )

    graph.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (np.zeros_like(p.value.data) if p.value.grad is None else p.value.grad.copy())
        for name, p in graph.params.items()
    }

    def central_difference(flat: np.ndarray, c: int, step: float) -> float:
        original = flat[c]
        flat[c] = original + step
        up = float(loss_fn().data)
        flat[c] = original - step
        down = float(loss_fn().data)
        flat[c] = original
        return (up - down) / (2.0 * step)

    rng = np.random.default_rng(seed)
    fallbacks = () if fallback_h is None else np.atleast_1d(fallback_h)
    report = GradCheckReport(h=h, tolerance=tolerance)
    for name, param in graph.params.items():
        flat = param.value.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= samples_per_param else rng.choice(n, samples_per_param, replace=False)
        worst = 0.0
        for c in coords:
            target = float(analytic[name].reshape(-1)[c])
            err = _relative_error(target, central_difference(flat, c, h))
            for step in fallbacks:
                if err < tolerance / 2:
                    break
                err = min(err, _relative_error(target, central_difference(flat, c, float(step))))
            worst = max(worst, err)
        report.entries.append(ParameterReport(name, worst, len(coords)))
    return report


def standard_suite(
    seed: int = 0, h: float | None = None
) -> list[tuple[str, GradCheckReport]]:
    """Check every layer type, both losses, and the full fusion model.

    Individual layers are held to a relative error of 1e-4; the end-to-end
    joint objective through the fusion model to 1e-3. Returns
    ``(check_name, report)`` pairs in a fixed order.

    When ``h`` is ``None`` each check picks its own step: 1e-3 for the
    shallow layer checks, 1e-5 for the deep fusion graph, where a coarser
    step makes the difference quotient straddle max-pool argmax switches
    and misreport the (correct) one-sided gradient.
    """
    from . import tensor as T
    from .layers import ConvBlock, Dense, MultiHeadSelfAttention
    from .losses import LossConfig, cross_entropy, joint_loss, renyi_divergence_loss
    from .models import ModelSpec, build_reno

    h_layer = 1e-3 if h is None else h
    h_deep = 1e-5 if h is None else h
    # retry steps for coordinates near a kink (finer) or with a near-zero
    # gradient at the roundoff floor (coarser)
    layer_fallbacks = (1e-4, 1e-5, 1e-2)
    rng = np.random.default_rng(seed)
    checks: list[tuple[str, GradCheckReport]] = []

    def weighted_mean(out: Tensor, weights: np.ndarray) -> Tensor:
        # random linear functional: exercises non-uniform output gradients
        return T.mean_all(T.mul_array(out, weights))

    # dense -> softmax -> cross-entropy
    graph = Graph(seed, np.float64)
    dense = Dense(graph, "dense", 6, 4)
    x = rng.standard_normal((3, 6))
    y = rng.integers(0, 4, size=3)
    report = grad_check(
        graph, lambda: cross_entropy(T.softmax(dense(Tensor(x))), y), h=h_layer, tolerance=1e-4, fallback_h=layer_fallbacks
    )
    checks.append(("dense_softmax_cross_entropy", report))

    # two conv blocks plus the adaptive pool
    graph = Graph(seed, np.float64)
    block1 = ConvBlock(graph, "conv1", 1, 3)
    block2 = ConvBlock(graph, "conv2", 3, 4)
    xc = rng.standard_normal((2, 1, 20))
    wc = rng.standard_normal((2, 4, 6))

    def conv_loss():
        out = T.adaptive_maxpool1d(block2(block1(Tensor(xc))), 6)
        return weighted_mean(out, wc)

    checks.append(
        ("conv_blocks_maxpool", grad_check(graph, conv_loss, h=h_layer, tolerance=1e-4, fallback_h=layer_fallbacks))
    )

    # multi-head self-attention
    graph = Graph(seed, np.float64)
    attn = MultiHeadSelfAttention(graph, "attn", 8, 2)
    xa = rng.standard_normal((2, 5, 8))
    wa = rng.standard_normal((2, 5, 8))
    checks.append(
        (
            "self_attention",
            grad_check(
                graph,
                lambda: weighted_mean(attn(Tensor(xa)), wa),
                h=h_layer,
                tolerance=1e-4,
                fallback_h=layer_fallbacks,
            ),
        )
    )

    # divergence loss w.r.t. both raw feature inputs
    graph = Graph(seed, np.float64)
    feat_x = graph.add_parameter("feat_x", rng.standard_normal((3, 6)))
    feat_y = graph.add_parameter("feat_y", rng.standard_normal((3, 6)))
    cfg = LossConfig()
    checks.append(
        (
            "renyi_divergence",
            grad_check(
                graph,
                lambda: renyi_divergence_loss(feat_x.value, feat_y.value, cfg),
                h=h_layer,
                tolerance=1e-4,
                fallback_h=layer_fallbacks,
            ),
        )
    )

    # full fusion model under the joint objective
    spec = ModelSpec(kind="RENO", input_dims=(18, 24), num_classes=3, dropout_rate=0.0)
    model = build_reno(spec, seed=seed, dtype=np.float64)
    model.graph.eval()
    views = [rng.standard_normal((4, 18)), rng.standard_normal((4, 24))]
    labels = rng.integers(0, 3, size=4)

    def reno_loss():
        result = model.forward(views)
        ce = cross_entropy(result.probs, labels)
        rd = renyi_divergence_loss(result.taps[0], result.taps[1], cfg)
        return joint_loss(ce, rd, cfg.lambda_)

    checks.append(
        (
            "reno_joint_objective",
            grad_check(
                model.graph,
                reno_loss,
                h=h_deep,
                tolerance=1e-3,
                samples_per_param=4,
                fallback_h=(h_layer, h_deep / 4.0, 1e-2),
            ),
        )
    )
    return checks

from typing import Optional, Tuple

import numpy as np

from magig.core.autodiff import ScalarTarget, decoder_vjp, forward, grad_input
from magig.core.exception_error import PathEvaluationError, PreconditionError, SelectorError, ToolkitError
from magig.core.interpolation import InterpolationMode, LatentInterpolator
from magig.core.logger import logger
from magig.core.utils import nearest_rank_threshold
from magig.model.attribution_model import AttributionMap, PathTrace
from magig.model.autoencoder_model import Autoencoder
from magig.schema.attribution_schema import AttributionRequest, PathRequest


def _at_step(step: int, fn, *args):
    try:
        return fn(*args)
    except SelectorError:
        raise
    except ToolkitError as err:
        logger.error(f"path evaluation failed at step {step}: {err.detail}")
        raise PathEvaluationError(err.detail, step=step)


def path_gradients(target: ScalarTarget, states: np.ndarray) -> np.ndarray:
    """Input gradients of the target at every state, one batched backward pass."""
    try:
        _, tape = forward(target.fn, states)
        return grad_input(tape, target.selector)
    except SelectorError:
        raise
    except ToolkitError:
        # redo step by step to name the failing state
        return np.stack([_at_step(k, target.grad, state) for k, state in enumerate(states)])


def select_low_gradient(gradient: np.ndarray, fraction: float) -> np.ndarray:
    """Indices with |g| at or below the nearest-rank q-quantile; ties are all kept."""
    magnitude = np.abs(gradient)
    return np.flatnonzero(magnitude <= nearest_rank_threshold(magnitude, fraction))


def completeness_gap(values: np.ndarray, target: ScalarTarget, x, baseline) -> float:
    return float(abs(np.sum(values) - (target.value(x) - target.value(baseline))))


class AttributionService:
    def riemann_attribute(self, trace: PathTrace, target: ScalarTarget) -> AttributionMap:
        if trace.steps == 0:
            return AttributionMap(values=np.zeros(trace.states.shape[1]), method=trace.method)
        gradients = trace.gradients
        if gradients is None or len(gradients) != trace.steps:
            gradients = path_gradients(target, trace.states[:-1])
        values = np.sum(gradients * trace.deltas, axis=0)
        return AttributionMap(values=values, method=trace.method)

    def gxi(self, x, target: ScalarTarget, baseline=None) -> AttributionMap:
        x = np.asarray(x, dtype=np.float64)
        reference = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
        gradient = _at_step(0, target.grad, x)
        return AttributionMap(values=gradient * (x - reference), method="gxi")

    def ig_path(self, x, baseline, steps: int) -> PathTrace:
        x, baseline = np.asarray(x, dtype=np.float64), np.asarray(baseline, dtype=np.float64)
        if x.shape != baseline.shape:
            raise PreconditionError(f"input shape {x.shape} and baseline shape {baseline.shape} differ")
        alphas = (np.arange(steps + 1) / steps)[:, None]
        states = baseline + alphas * (x - baseline)
        states[0], states[-1] = baseline, x
        return PathTrace(method="ig", states=states)

    def gig_path(self, x, baseline, target: ScalarTarget, steps: int, fraction: float, eta: float) -> PathTrace:
        x, baseline = np.asarray(x, dtype=np.float64), np.asarray(baseline, dtype=np.float64)
        logger.info(f"Building input-space guided path: K={steps}, q={fraction}, eta={eta}")
        states, gradients, selections = [baseline.copy()], [], []
        current = baseline.copy()
        for k in range(steps):
            gradient = _at_step(k, target.grad, current)
            gradients.append(gradient)
            if k == steps - 1:
                break
            selected = select_low_gradient(gradient, fraction)
            selections.append(selected)
            current = current.copy()
            current[selected] += eta * (x[selected] - current[selected])
            states.append(current)
        states.append(x.copy())
        return PathTrace(
            method="gig", states=np.stack(states), gradients=np.stack(gradients),
            selections=selections, target=target.selector,
        )

    def latent_interp_path(self, x, baseline, ae: Autoencoder, steps: int, mode: InterpolationMode = "linear") -> PathTrace:
        x, baseline = np.asarray(x, dtype=np.float64), np.asarray(baseline, dtype=np.float64)
        z, z_baseline = ae.encode_endpoints(x, baseline)
        interpolator = LatentInterpolator(z_baseline, z, mode)
        latents = np.stack([interpolator.at(k / steps) for k in range(steps + 1)])
        latents[0], latents[-1] = z_baseline, z
        states = np.empty((steps + 1, x.size))
        states[0], states[-1] = baseline, x
        if steps > 1:
            states[1:-1] = ae.decode(latents[1:-1])
        return PathTrace(method="eig", states=states, latents=latents)

    def magig_path(
        self,
        x,
        baseline,
        target: ScalarTarget,
        ae: Autoencoder,
        steps: int,
        fraction: float,
        eta: float,
        mode: InterpolationMode = "linear",
    ) -> PathTrace:
        x, baseline = np.asarray(x, dtype=np.float64), np.asarray(baseline, dtype=np.float64)
        logger.info(f"Building manifold-aligned guided path: K={steps}, q={fraction}, eta={eta}, {mode} latents")
        z, z_baseline = ae.encode_endpoints(x, baseline)
        interpolator = LatentInterpolator(z_baseline, z, mode)
        progress = np.zeros_like(z)

        latents, gradients, selections = [z_baseline.copy()], [], []
        current = z_baseline.copy()
        for k in range(steps):
            decoded = _at_step(k, ae.decode, current)
            input_gradient = _at_step(k, target.grad, decoded)
            gradients.append(input_gradient)
            if k == steps - 1:
                break
            latent_gradient = _at_step(k, decoder_vjp, ae.decoder, current, input_gradient)
            selected = select_low_gradient(latent_gradient, fraction)
            selections.append(selected)
            if interpolator.mode == "slerp":
                progress[selected] += eta * (1.0 - progress[selected])
                current = interpolator.at(progress)
            else:
                current = current.copy()
                current[selected] += eta * (z[selected] - current[selected])
            latents.append(current)
        latents.append(z.copy())

        latents = np.stack(latents)
        states = np.empty((steps + 1, x.size))
        states[0], states[-1] = baseline, x
        if steps > 1:
            states[1:-1] = ae.decode(latents[1:-1])
        # row 0 was taken at D(E(x')), the corrected path starts at x'
        gradients[0] = _at_step(0, target.grad, baseline)
        return PathTrace(
            method="magig", states=states, latents=latents, gradients=np.stack(gradients),
            selections=selections, target=target.selector,
        )

    def magig_attribute(self, request: AttributionRequest) -> AttributionMap:
        if request.method != "magig":
            raise PreconditionError(f"magig_attribute got a {request.method} request")
        return self.attribute(request)[0]

    def attribute(self, request: AttributionRequest) -> Tuple[AttributionMap, Optional[PathTrace]]:
        target = request.classifier.target(request.target)
        x, baseline = request.x, request.baseline
        logger.info(f"Attributing with {request.method}: n={x.size}, target={request.target}, K={request.steps}")

        trace = None
        if request.method == "gxi":
            values = self.gxi(x, target, baseline).values
        elif np.array_equal(x, baseline):
            logger.warning("input equals baseline; attribution is identically zero")
            values = np.zeros_like(x)
        else:
            trace = self.build_path(request, target)
            values = self.riemann_attribute(trace, target).values

        metadata = {
            "method": request.method,
            "target": request.target,
            "steps": request.steps,
            "fraction": request.fraction,
            "eta": request.eta,
            "interpolation": request.interpolation,
        }
        residual = completeness_gap(values, target, x, baseline)
        return AttributionMap(values=values, method=request.method, completeness_residual=residual, metadata=metadata), trace

    def build_path(self, request: PathRequest, target: Optional[ScalarTarget] = None) -> PathTrace:
        target = target or request.classifier.target(request.target)
        x, baseline, steps = request.x, request.baseline, request.steps
        if request.method == "gxi":
            raise PreconditionError("gradient x input is a single-point method without a path")
        if request.method == "ig":
            return self.ig_path(x, baseline, steps)
        if request.method == "gig":
            return self.gig_path(x, baseline, target, steps, request.fraction, request.eta)
        if request.method == "eig":
            return self.latent_interp_path(x, baseline, request.autoencoder, steps, request.interpolation)
        return self.magig_path(
            x, baseline, target, request.autoencoder, steps, request.fraction, request.eta, request.interpolation
        )

import logging
from typing import Callable, Optional

import numpy as np

from core.errors import ConfigurationError
from core.params import ParamStore
from models.report import GradCheckEntry, GradCheckReport

logger = logging.getLogger(__name__)

MIN_STEP = 1e-7
MAX_STEP = 1e-3
RETRY_FACTORS = (1.0, 0.1, 0.01)


def _roundoff_allowance(loss: float, step: float) -> float:
    return 1e3 * np.finfo(np.float64).eps * max(1.0, abs(loss)) / step


def _coordinate_error(analytic: float, numeric: float, loss: float, step: float) -> float:
    diff = max(0.0, abs(analytic - numeric) - _roundoff_allowance(loss, step))
    if diff == 0.0:
        return 0.0
    return diff / max(abs(analytic), abs(numeric), 1e-300)


def grad_check(
    loss_fn: Callable[[], float],
    backward_fn: Callable[[], None],
    store: ParamStore,
    eps: float = 1e-5,
    tol: float = 1e-4,
    coords: int = 32,
    seed: int = 0,
    names: Optional[list] = None
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` runs a forward pass and returns the scalar loss; ``backward_fn``
    populates ``store`` gradients for the forward just run. Frozen entries are
    skipped. A coordinate that fails at ``eps`` is retried at smaller steps
    (down to 1e-7) since a step straddling a ReLU kink breaks the difference
    quotient without indicating a wrong gradient.
    """
    if not MIN_STEP <= eps <= MAX_STEP:
        raise ConfigurationError(f"eps must lie in [{MIN_STEP}, {MAX_STEP}], got {eps}")

    rng = np.random.default_rng(seed)
    store.zero_grad()
    loss0 = float(loss_fn())
    backward_fn()
    analytic = {name: entry.grad.copy() for name, entry in store.items()}
    store.zero_grad()

    entries = []
    skipped = []
    for name, entry in store.items():
        if names is not None and name not in names:
            continue
        if not entry.trainable:
            skipped.append(name)
            continue

        value = entry.value
        if value.size <= coords:
            indices = np.arange(value.size)
        else:
            indices = np.sort(rng.choice(value.size, size=coords, replace=False))

        worst = 0.0
        non_finite = False
        for index in indices:
            best = np.inf
            for factor in RETRY_FACTORS:
                step = max(eps * factor, MIN_STEP)
                original = value.flat[index]
                value.flat[index] = original + step
                plus = float(loss_fn())
                value.flat[index] = original - step
                minus = float(loss_fn())
                value.flat[index] = original
                if not (np.isfinite(plus) and np.isfinite(minus)):
                    non_finite = True
                    best = np.inf
                    break
                numeric = (plus - minus) / (2.0 * step)
                best = min(best, _coordinate_error(analytic[name].flat[index], numeric, loss0, step))
                if best <= tol or step == MIN_STEP:
                    break
            worst = max(worst, best)

        passed = bool((not non_finite) and worst <= tol)
        if not passed:
            logger.warning("grad_check failed for %s: max relative error %.3e", name, worst)
        entries.append(GradCheckEntry(
            name=name,
            checked=int(len(indices)),
            max_rel_error=float(worst) if np.isfinite(worst) else None,
            non_finite=non_finite,
            passed=passed
        ))

    return GradCheckReport(
        eps=eps,
        tol=tol,
        loss=loss0 if np.isfinite(loss0) else None,
        entries=entries,
        skipped_frozen=skipped,
        passed=bool(all(e.passed for e in entries) and np.isfinite(loss0))
    )

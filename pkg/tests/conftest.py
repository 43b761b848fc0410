import math

import numpy as np
import pytest

from irsnoma.harness import default_config, draw_trial_channels, trial_seed
from irsnoma.optimizer import SystemModel


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def toy_model(rng, users=(2, 2), n_tx=3, l_irs=4, r_min=0.1, bits=None, sigma2=1.0, p_max=1.0,
              gain=3.0):
    """Small random i.i.d. model with moderate SNR."""
    f = gain * crandn(rng, l_irs, n_tx)
    g = [crandn(rng, k, l_irs) for k in users]
    r = [np.full(k, r_min) for k in users]
    return SystemModel(f, g, sigma2, p_max, r, bits)


def desk_model(seed, trial=0, cfg=None):
    """Model and init seed for one desk-profile trial, as the harness draws it."""
    cfg = cfg or default_config("desk")
    ch_seed, init_seed = trial_seed(seed, "none", trial).spawn(2)
    ch = draw_trial_channels(cfg, np.random.default_rng(ch_seed))
    model = SystemModel.from_channels(ch, cfg.radio.sigma2, cfg.radio.p_max, cfg.radio.r_min,
                                      bits=cfg.radio.bits)
    return model, np.random.default_rng(init_seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def power_grid_oracle(model, w, v, step=1e-4):
    """Best feasible objective over p_{1,1} on a grid (M=1, K=2)."""
    best = -np.inf
    for p1 in np.arange(0.0, 1.0 + step / 2, step):
        ev = model.evaluate(w, v, [np.array([p1, 1.0 - p1])])
        if ev.min_qos >= 0:
            best = max(best, ev.objective)
    return best


def power_toy(seed):
    """M=1, K=2 instance with a binding QoS requirement and its start state."""
    from irsnoma.optimizer import SolutionState, evaluate_into, matched_filters

    rng = np.random.default_rng(seed)
    model = toy_model(rng, users=(2,), n_tx=3, l_irs=4, r_min=1.0)
    theta = rng.uniform(0, 2 * math.pi, 4)
    w = matched_filters(model, np.exp(1j * theta))
    state = evaluate_into(model, SolutionState(w=w, theta=theta, p=[np.array([0.5, 0.5])]))
    return model, state

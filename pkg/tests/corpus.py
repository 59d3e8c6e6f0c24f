"""Model corpus shared by the test modules."""

from fellerlab.warping import make_model, warping

# name: (dim, body, tail, blend window)
SPECS = {
    "euclid2": (2, "r", None, None),
    "euclid3": (3, "r", None, None),
    "hyperbolic2": (2, "sinh(r)", None, None),
    "hyperbolic3": (3, "sinh(r)", None, None),
    "cosh_splice3": (3, "r", "cosh(r)", (0.5, 1.5)),
    "cubic_decay2": (2, "r", "exp(-r^3)", (2.0, 10.0)),
    "cubic_growth2": (2, "r", "exp(r^3)", (1.0, 2.0)),
    "quartic_decay3": (3, "r", "exp(-r^4)", (1.0, 3.0)),
    "cylinder2": (2, "r", "1", (0.5, 1.5)),
    "quadratic2": (2, "r", "r^2", (1.0, 3.0)),
    "gaussian2": (2, "r", "exp(-r^2)", (2.0, 10.0)),
    "exponential2": (2, "r", "exp(-r)", (1.0, 3.0)),
}

_cache = {}


def model(name):
    if name not in _cache:
        dim, body, tail, blend = SPECS[name]
        _cache[name] = make_model(dim, warping(body, tail, blend), name=name)
    return _cache[name]


def corpus():
    return [model(n) for n in SPECS]

"""Reference models used by the tests, the CLI presets and the documentation."""

from __future__ import annotations

from .model_core import (
    Component,
    Gaussian,
    MixtureModel,
    SkewNormal,
    linear_weight,
    polynomial,
    quadratic_weight,
)


def gm1() -> MixtureModel:
    """Unequal-variance Gaussian pair: lambda=0.6, m1=1+2x, m2=-1+x, sd 1.5 and 0.5."""
    return MixtureModel(
        [
            Component(polynomial([1.0, 2.0], "m1"), Gaussian(1.5)),
            Component(polynomial([-1.0, 1.0], "m2"), Gaussian(0.5)),
        ],
        weights=[0.6, 0.4],
        name="gm1",
    )


def sk1(lam: float = 0.7, alpha: float = 4.0) -> MixtureModel:
    """Opposite-skew pair with equal variances and GM1's regression lines."""
    return MixtureModel(
        [
            Component(polynomial([1.0, 2.0], "m1"), SkewNormal(alpha)),
            Component(polynomial([-1.0, 1.0], "m2"), SkewNormal(-alpha)),
        ],
        weights=[lam, 1.0 - lam],
        name="sk1",
    )


def sk2(lam: float = 0.6) -> MixtureModel:
    """Opposite-skew pair with unequal scales; both MGF directions and the CF separate the components."""
    return MixtureModel(
        [
            Component(polynomial([1.0, 2.0], "m1"), SkewNormal(4.0, 1.5)),
            Component(polynomial([-1.0, 1.0], "m2"), SkewNormal(-4.0, 0.5)),
        ],
        weights=[lam, 1.0 - lam],
        name="sk2",
    )


def fe_sk1() -> MixtureModel:
    """SK1 errors with covariate-dependent weight lambda(x) = 0.5 + 0.2 x."""
    return MixtureModel(
        [
            Component(polynomial([1.0, 2.0], "m1"), SkewNormal(4.0)),
            Component(polynomial([-1.0, 1.0], "m2"), SkewNormal(-4.0)),
        ],
        weight_function=linear_weight(0.5, [0.2]),
        name="fe_sk1",
    )


def fe_constant(lam: float = 0.5) -> MixtureModel:
    """FE-SK1 with a flat weight function."""
    return MixtureModel(
        [
            Component(polynomial([1.0, 2.0], "m1"), SkewNormal(4.0)),
            Component(polynomial([-1.0, 1.0], "m2"), SkewNormal(-4.0)),
        ],
        weight_function=linear_weight(lam, [0.0]),
        name="fe_constant",
    )


def fe_degenerate_base() -> MixtureModel:
    """Weight reaching one at x0=0; components share the error law and m1(0)=m2(0)."""
    return MixtureModel(
        [
            Component(polynomial([0.0, 2.0], "m1"), Gaussian(1.0)),
            Component(polynomial([0.0, 1.0], "m2"), Gaussian(1.0)),
        ],
        weight_function=quadratic_weight(1.0, 0.5, [0.0]),
        name="fe_degenerate_base",
    )


def degenerate(sigma: float = 1.0) -> MixtureModel:
    """Single regression line, i.e. a mixture with lambda = 1."""
    return MixtureModel([Component(polynomial([1.0, 2.0], "m1"), Gaussian(sigma))], weights=[1.0], name="degenerate")


def point_mass() -> MixtureModel:
    """m = 0 with a near-point-mass error."""
    return MixtureModel([Component(polynomial([0.0], "m1"), Gaussian(1e-10))], weights=[1.0], name="point_mass")


def identical(lam: float = 0.5) -> MixtureModel:
    """Two N(0,1) components with GM1's non-parallel regression lines."""
    return MixtureModel(
        [
            Component(polynomial([1.0, 2.0], "m1"), Gaussian(1.0)),
            Component(polynomial([-1.0, 1.0], "m2"), Gaussian(1.0)),
        ],
        weights=[lam, 1.0 - lam],
        name="identical",
    )


def gm3() -> MixtureModel:
    """Three unit-variance Gaussians: m1=3+x, m2=0.3x^2, m3=-3+2x, weights (0.5, 0.3, 0.2)."""
    return MixtureModel(
        [
            Component(polynomial([3.0, 1.0], "m1"), Gaussian(1.0)),
            Component(polynomial([0.0, 0.0, 0.3], "m2"), Gaussian(1.0)),
            Component(polynomial([-3.0, 2.0], "m3"), Gaussian(1.0)),
        ],
        weights=[0.5, 0.3, 0.2],
        name="gm3",
    )


def linear3() -> MixtureModel:
    """Three straight lines in a scalar covariate; slope matrices are rank deficient."""
    return MixtureModel(
        [
            Component(polynomial([3.0, 1.0], "m1"), Gaussian(1.0)),
            Component(polynomial([0.0, 0.5], "m2"), Gaussian(1.0)),
            Component(polynomial([-3.0, 2.0], "m3"), Gaussian(1.0)),
        ],
        weights=[0.5, 0.3, 0.2],
        name="linear3",
    )


def j1() -> MixtureModel:
    return MixtureModel([Component(polynomial([0.5, 1.5], "m1"), Gaussian(1.0))], weights=[1.0], name="j1")


PRESETS = {
    "gm1": gm1,
    "gm3": gm3,
    "sk1": sk1,
    "sk2": sk2,
    "fe_sk1": fe_sk1,
    "fe_constant": fe_constant,
    "fe_degenerate_base": fe_degenerate_base,
    "degenerate": degenerate,
    "point_mass": point_mass,
    "identical": identical,
    "linear3": linear3,
    "j1": j1,
}

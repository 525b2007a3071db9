"""Small schedules shared across test modules."""

from mforge.legendre import SpectrumFunction

TENT = SpectrumFunction.tent(0.5, 1.0, 1.5)
F_PAIR = SpectrumFunction.tent(0.8, 1.0, 1.2)
G_PAIR = SpectrumFunction.tent(0.5, 1.0, 1.5)

TINY = {
    "single": dict(f=TENT, m_max=2, n_override=[5, 6], eps_override=[0.8, 0.7]),
    "pair": dict(
        f=SpectrumFunction.from_knots([(1, 1), (3, 0.5)]),
        g=SpectrumFunction.from_knots([(1, 1), (4, 0.8)]),
        m_max=1, n_override=[5], eps_override=[0.4], reps_override=([1], [1]),
    ),
    "pair-two-levels": dict(
        f=SpectrumFunction.tent(0.5, 1.0, 2.5),
        g=SpectrumFunction.tent(0.5, 1.0, 3.0),
        m_max=2, preset="strict", n_override=[2, 5], eps_override=[0.5, 0.4], reps_override=([1, 1], [1, 1]),
    ),
    "plane": dict(
        f=SpectrumFunction.from_knots([(1.5, 1.5), (2.5, 1.2)], d=2),
        m_max=2, n_override=[2, 4], eps_override=[1.0, 0.9],
    ),
}

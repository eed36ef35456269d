"""
Explicit feedback: 3 versus 12 actuators
========================================

The free dynamics of the time-dependent benchmark are unstable.  With the
3 actuators of M = 1 the explicit feedback fails for every lambda, the
curves bunching together as lambda grows.  With the 12 actuators of M = 2
and lambda = 10 the state decays.  Writes demo_out/explicit.svg.
"""

from pathlib import Path

from deltastab.cli import run_experiment
from deltastab.config import ExperimentConfig
from deltastab.simulate import decay_rate_fit
from deltastab.svgplot import log_line_plot

out = Path("demo_out")
out.mkdir(exist_ok=True)

curves = []
for name in ("fig2_lambda0", "fig2_lambda10", "fig2_lambda50", "fig2_lambda100", "fig3_M2_rho0"):
    res = run_experiment(ExperimentConfig.load(name))
    s = res.series
    slope = decay_rate_fit(s, (1.0, 5.0))
    print(f"{name:16s} actuators {res.plant.B.shape[1]:2d}  ||y(5)||/||y(0)|| = {s.vprime[-1] / s.vprime[0]:10.3e}"
          f"  slope on [1,5] = {slope:7.3f}")
    curves.append((name, s.t, s.vprime))

(out / "explicit.svg").write_text(log_line_plot(curves, title="explicit feedback", ylabel="||y||_V'"))
print("wrote", out / "explicit.svg")

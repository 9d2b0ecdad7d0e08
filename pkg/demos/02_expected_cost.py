"""
Expected evaluation counts from semantic derivatives
====================================================

Marking a subterm with mark[l] leaves its meaning unchanged but lets us ask
how often it is evaluated.  The denotational semantics carries a dual number
per label, and the derivative of the converged mass in the label's direction
is the raw expected count; dividing by the convergence probability gives the
count conditioned on termination.
"""

import csv
import os
from fractions import Fraction

from ppcf import expected_count, make_mq, num
from ppcf.machine import estimate_conditional_count
from ppcf.syntax import App, Mark

# The program family M_q applies a recursive gate to its argument: with
# probability q it recurses, otherwise it uses the argument, and either way
# the chosen subterm is forced twice.  Marking the argument counts how often
# a call-by-name argument really gets evaluated.
def marked_mq(q):
    return App(make_mq(q), Mark(num(0), "t"))

for q in (Fraction(0), Fraction(1, 4), Fraction(3, 4)):
    est = expected_count(marked_mq(q), "t")
    print(f"q={str(q):4}  p_conv={est.p_conv:.6f}  raw={est.raw:.6f}"
          f"  conditional={est.conditional:.6f}")

# At q = 1/2 the recursion is critical: runs still terminate almost surely
# but the expected number of argument evaluations is infinite, and the
# analysis reports that instead of a number.
est = expected_count(marked_mq(Fraction(1, 2)), "t")
print(f"q=1/2  status={est.status}")

# At q = 1 the program never converges, so conditioning is meaningless.
est = expected_count(marked_mq(Fraction(1)), "t")
print(f"q=1    status={est.status}")

# The machine tells the same story by brute force: run many seeded samples
# and average the label counts over the converged ones.
mc = estimate_conditional_count(marked_mq(Fraction(1, 4)), "t",
                                n=20000, max_steps=5000, seed=7)
print(f"\nMonte Carlo at q=1/4: mean={mc.mean:.4f} +- {mc.stderr:.4f}"
      f"  ({mc.n_converged}/{mc.n} converged)")

# Sweep q across the unit interval and dump the curve for external plotting.
out_path = os.path.join(os.getcwd(), "mq_sweep.csv")
with open(out_path, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["q", "p_conv", "status", "conditional_count"])
    for k in range(21):
        q = Fraction(k, 20)
        est = expected_count(marked_mq(q), "t")
        cond = "" if est.conditional is None else f"{est.conditional:.9f}"
        w.writerow([f"{float(q):.2f}", f"{est.p_conv:.9f}", est.status, cond])
print(f"\nwrote 21-point sweep to {out_path}")

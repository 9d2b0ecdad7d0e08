"""
Running programs on the choice-sequence machine
===============================================

A program evaluates against an explicit sequence of binary choices: each
dice(r) consumes the next digit, taking 0 with probability r and 1 with
probability 1 - r.  A run is accepted when it ends on the numeral 0 with
every choice consumed, and its weight is the exact rational probability
of that choice sequence.
"""

from fractions import Fraction

from ppcf import enumerate_paths, init_state, parse_term, run, sample, typecheck

# A program with two coins.  The first decides between the branches; the
# second is only tossed on the nonzero branch, and the run converges there
# only when that coin comes up zero.
SRC = """
let x = dice(1/3) in
ifz x then mark[a] 0
      else ifz mark[b] dice(2/5) then 0 else succ x
"""

t = parse_term(SRC)
typecheck(t)
print("program:", " ".join(SRC.split()))

# Drive it by hand.  Choice string "0" means the first coin came up 0.
state = init_state(t)
for choices in ("0", "10", "11"):
    rec = run(state, choices)
    print(f"choices {choices!r:6} accepted={rec is not None}", end="")
    if rec is not None:
        print(f" weight={rec.weight} labels={rec.labels} steps={rec.steps}")
    else:
        print()

# Exhaustive enumeration explores both digits at every coin and partitions
# the unit of probability mass into converged, rejected, diverged and open
# (still running when a budget ran out).  Every weight is a Fraction, so
# the partition is exact.
res = enumerate_paths(init_state(t))
print("\nall converging paths:")
for rec in res.paths:
    print(f"  {rec.choices!r:6} weight={rec.weight} labels={rec.labels}")
print("converged mass:", res.converged_mass)
print("rejected mass: ", res.rejected_mass)
total = res.converged_mass + res.rejected_mass + res.diverged_mass + res.open_mass
assert total == Fraction(1)
print("masses sum to 1 exactly")

# Monte Carlo agrees: sampling draws the choice digits from a seeded RNG.
n, hits = 4000, 0
for i in range(n):
    rec = sample(init_state(t), seed=9000 + i, max_steps=5000)
    hits += rec.converged
print(f"\nsampled convergence: {hits}/{n} = {hits / n:.4f}"
      f"  (exact mass {float(res.converged_mass):.4f})")

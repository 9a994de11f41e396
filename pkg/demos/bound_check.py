"""High-emission fidelity against 0.5 (1 + C/(C+1)) for the strong-coupling rows."""
from cavswap import TABLE1, NoHighEmissionPoint
from cavswap.sweep import run_bound_check

for row in ("a", "b", "e"):
    try:
        chk = run_bound_check(TABLE1[row], areas=(5.0, 20.0), sigma_range=(1.0, 50.0, 40),
                              label=row)
    except NoHighEmissionPoint as exc:
        print(row, "->", exc)
        continue
    print(f"row {row}: C={chk.cooperativity:g}  best F={chk.best_fidelity:.4f} "
          f"(P_ex={chk.best_p_ex:.3f})  reference={chk.reference_fidelity:.4f}  "
          f"excess={chk.excess:+.4f}  worst <J>-bound={chk.max_bound_violation:.1e}")

"""Ground state of the free problem, the attained state with the delta, and the
two-bump interaction energy at large separation.

Run: python3 demos/ground_state_tour.py
"""
from scipy.special import beta

from deltanls import groundstate as gs
from deltanls.params import Params

pr = Params(7.0, -4.0)
n = gs.norms_Q(pr)
# for p = 7 the profile is 4^{1/6} sech^{1/3}(3x), so its mass is a Beta-function value
closed = 4 ** (1 / 3) / 3 * beta(1 / 3, 0.5)
print(f"M(Q) = {n.mass:.15f}   closed form {closed:.15f}")
print(f"E(Q) = {n.energy:.6f}, kinetic {n.kinetic:.6f}, L^8 norm^8 {n.lp1:.6f}")
print(f"Pohozaev residual {n.pohozaev_residual():.1e}, Nehari residual {n.nehari_residual():.1e}")

# with the delta the ground state is two halves of a shifted Q; it exists once omega > gamma^2 / 4
pw = pr.with_(omega=5.0)
print(f"\nattained state at omega=5: shift {gs.attained_shift(pw):.6f}, peak {gs.eval_Q_omega_gamma(0.0, pw):.6f}")
interior, jump = gs.attained_residuals(pw)
print(f"ODE residual {interior:.1e}, jump-condition residual {jump:.1e}")

print("\ninteraction energy of Q(|x| - y) against its expansions")
print(f"{'gamma':>6} {'y':>4} {'exact':>12} {'leading':>12} {'two-term':>12}")
for g in (-2.0, -4.0):
    p = Params(7.0, g)
    for y in (4.0, 6.0, 8.0):
        r = gs.script_Q_asymptotic(y, p)
        print(f"{g:6.1f} {y:4.1f} {gs.script_Q(y, p):12.4e} {gs.script_Q_leading(y, p):12.4e} "
              f"{gs.script_Q_two_term(y, p):12.4e}")
print("gamma = -2 is the degenerate coupling: the e^{-2y} coefficient vanishes")

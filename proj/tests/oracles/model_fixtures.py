"""Independent evaluation of the model formulas used to freeze test fixtures.

Written directly from the governing equations, without reference to the C++
sources. Run with `python3 tests/oracles/model_fixtures.py`; the printed values
are pasted into tests/model_test.cpp and tests/estimation_test.cpp.
"""
import math

K = 273.15

P = dict(L=0.18, d_i=3.3e-3, delta=2.5e-5, sigma=0.0728, sigma0=1.0, g=9.8,
         rho_l=1000.0, rho_v=1.0, h_lfv=100.0, h_lfw=1000.0, h_v=10.0,
         c_vv=1800.0, c_vl=1900.0, R=8.31, R_v=461.0, mu_l=1.0e-3, L_v=0.02,
         T_w=40.0, T_v0=20.0, p_v0=1.0e5, p_l=5.5816e4, m_f0_ratio=0.1, r_v=0.0)
P["L_0"] = 25 * P["d_i"]
P["L_p"] = P["L"]


def volume(p):
    return math.pi * p["d_i"] ** 2 / 4 * (p["L"] + p["L_v"])


def m_v0(p):
    return p["p_v0"] * volume(p) / (p["R_v"] * (p["T_v0"] + K))


def flux(pv, Tv, pl, tau, s0, R):
    return (2 * s0 / (2 - s0)) / math.sqrt(2 * math.pi * R) * (
        pv / math.sqrt(Tv + K) - pl / math.sqrt(tau + K))


def cf(Re):
    return 16 / Re if Re <= 1180 else 0.078 * Re ** -0.25


def coeffs(p, Tv, tau, mv, xp, vp, pv1, pv2):
    d, de = p["d_i"], p["d_i"] - 2 * p["delta"]
    pv = mv * p["R_v"] * (Tv + K) / volume(p)
    rm = flux(pv, Tv, p["p_l"], tau, p["sigma0"], p["R"])
    rv = 0.0 if p["T_w"] > Tv else p["r_v"]
    mv0 = m_v0(p)
    mf = p["m_f0_ratio"] * mv0
    Re = p["rho_l"] * abs(vp) * d / p["mu_l"]
    c = dict()
    c["a"] = -p["h_lfv"] * p["L"] * math.pi * de / p["c_vv"]
    c["alpha1"] = rm * p["h_v"] * p["L"] * math.pi * de / p["c_vv"]
    c["alpha2"] = pv * math.pi / (p["rho_v"] * p["c_vv"]) * (de * rm - d * p["L_v"] * rv)
    c["b"] = -p["h_lfv"] * p["L"] * math.pi * de / (mf * p["c_vl"])
    c["eps"] = p["h_lfw"] * p["L"] * math.pi * d / (mf * p["c_vl"])
    c["alpha3"] = rm * p["h_v"] * p["L"] * math.pi * de / (mf * p["c_vl"])
    c["Delta"] = math.pi * de * rm / mv0
    c["beta"] = math.pi * de ** 2 * (pv1 - pv2) / 4 + p["g"]
    c["gamma"] = math.pi * d * p["L_p"] * cf(Re) * p["rho_l"] / 2
    c["beta1"] = p["rho_l"] * p["L_0"] * math.pi * d ** 2 / 4
    c["beta2"] = p["rho_l"] * math.pi * d ** 2 / 4
    c["A"] = c["beta"] / c["beta1"]
    c["B"] = c["gamma"] / c["beta1"]
    c["Q1"] = c["b"] * Tv + c["alpha3"]
    c["Q2"] = c["b"] + c["eps"]
    return c


def terminal_closure(p, pv1, pv2, iters=200):
    """Fixed-point iteration v <- sqrt(A / B(v)); independent of any closed form."""
    v = 1.0
    for _ in range(iters):
        c = coeffs(p, p["T_v0"], p["T_v0"], m_v0(p), 0.0, v, pv1, pv2)
        v = math.sqrt(c["A"] / c["B"])
    c = coeffs(p, p["T_v0"], p["T_v0"], m_v0(p), 0.0, v, pv1, pv2)
    return v, c["A"], c["B"]


def show(name, v):
    print(f"{name} = {v:.17g}")


if __name__ == "__main__":
    show("critical_diameter", 2 * math.sqrt(0.0728 / (9.8 * (1000 - 1))))
    show("flux_example", flux(1e5, 20.0, 5.5816e4, 20.0, 1.0, 8.31))
    show("plug_mass_x0", P["rho_l"] * math.pi * P["d_i"] ** 2 / 4 * P["L_0"])
    show("m_v0", m_v0(P))
    c = coeffs(P, 20.0, 20.0, m_v0(P), 0.0, 0.1, 1.05e5, 1.0e5)
    for k in ["a", "alpha1", "alpha2", "b", "eps", "alpha3", "Delta", "beta",
              "gamma", "beta1", "beta2", "A", "B", "Q1", "Q2"]:
        show("coeff." + k, c[k])
    # Plug drive used by the estimation forward map: vapour heated isochorically
    # from T_v0 to T_w on the evaporator side, initial pressure on the other side.
    pv1 = P["p_v0"] * (P["T_w"] + K) / (P["T_v0"] + K)
    show("drive.p_v1", pv1)
    v, A, B = terminal_closure(P, pv1, P["p_v0"])
    show("closure.v_terminal", v)
    show("closure.A", A)
    show("closure.B", B)

"""Smoke test for the compiled extension.

    pip install --no-build-isolation -e crates/python
    python crates/python/python/smoke_test.py
"""

import json
import math

import pairsource


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b, tol)


def main():
    reg = pairsource.MaterialRegistry()
    assert len(reg) > 0
    n = reg.refractive_index("KTP", "Z", 0.81, 111.0)
    ng = reg.group_index("KTP", "Z", 0.81, 111.0)
    assert ng > n > 1.7

    period = pairsource.solve_poling_period("KTP", 810.0, 532.0, 111.0)
    close(period, 9.6, 0.5)
    close(pairsource.idler_wavelength(532.0, 810.0), 1550.08, 0.01)

    spectrum = pairsource.pm_spectrum("KTP", 532.0, 810.0, period, 4.5, 111.0, [809.0, 810.0, 811.0])
    close(spectrum[1][1], 1.0, 1e-9)

    rows = pairsource.coherence_scan("length_scan_ktp.cfg")
    close(rows[-1]["visibility"], 0.406, 0.03)
    assert isinstance(rows[-1]["rho"], complex)
    close(pairsource.solve_plate_thickness("single_point.cfg"), 0.86, 0.10)
    close(pairsource.asymptotic_rho(0.0, 1e-12), 0.5, 0.0)

    rho = pairsource.DensityMatrix.load("rho_exp")
    close(rho.eof(), 0.56, 0.01)
    close(rho.max_fidelity()[0], 0.95, 0.01)
    bell = pairsource.DensityMatrix.bell()
    close(bell.chsh(), 2.0 * math.sqrt(2.0), 1e-12)
    close(pairsource.DensityMatrix(bell.rows()).concurrence(), 1.0, 1e-9)

    counts = pairsource.simulate_counts(pairsource.DensityMatrix.mixed(0.8), 1e10)
    close(pairsource.reconstruct(counts).concurrence(), 0.8, 1e-6)
    seeded = pairsource.simulate_counts(bell, 1e4, seed=5)
    assert seeded == pairsource.simulate_counts(bell, 1e4, seed=5)

    assert pairsource.s_from_visibilities(1.0, 0.41) < 2.0 < pairsource.s_from_visibilities(1.0, 0.42)
    m, p = pairsource.multi_pair_probability(5e-9, 3e-10, 540e-6, 532e-9)
    assert 1e-3 < m < 3e-3 and p < 1e-5
    close(pairsource.spectral_resolution(1550.0, 1e-9) * 1e3, 8.0, 0.16)

    try:
        pairsource.idler_wavelength(532.0, 400.0)
    except pairsource.InputError as e:
        assert isinstance(e, ValueError)
    else:
        raise AssertionError("expected InputError")

    code, out, err = pairsource.run_cli(["metrics", "--format", "doc"])
    assert code == 0, err
    close(json.loads(out)["eof"], 0.56, 0.01)
    code, _, err = pairsource.run_cli(["metrics", "--fixture", "/missing.txt"])
    assert code == 2 and json.loads(err)["error"] == "io"

    print("python smoke test passed")


if __name__ == "__main__":
    main()

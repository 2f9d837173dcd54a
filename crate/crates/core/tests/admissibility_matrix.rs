//! Full admissibility matrix on the default probe grid, plus tail-size
//! checks against the analytic asymptotes of each gate family.

use softgate::admissibility::{check_gate, ProbeGrid};
use softgate::gates::GateKind;

const TAUS: [f64; 6] = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];

#[test]
fn every_gate_family_passes_at_every_temperature() {
    let grid = ProbeGrid::default();
    for kind in GateKind::SMOOTH {
        for tau in TAUS {
            let report = check_gate(kind, tau, &grid).unwrap();
            assert!(
                report.is_admissible(),
                "{kind} tau={tau} rejected: {report:?}"
            );
            assert!((report.peak_value - 1.0).abs() < 1e-12);
            assert!(report.monotone_worst <= 1e-9);
        }
    }
}

#[test]
fn measured_tails_match_analytic_asymptotes() {
    let grid = ProbeGrid::default();
    let x = grid.tail_probe;
    for tau in [0.5, 1.0, 2.0] {
        // x f'(x) ~ 1/(tau^2 x) for arctan; the measured tail maximum sits
        // at the left end of the probe tail, x/2.
        let report = check_gate(GateKind::Arctan, tau, &grid).unwrap();
        let expect = 1.0 / (tau * tau * (x / 2.0));
        assert!(
            (report.tail_value / expect - 1.0).abs() < 0.05,
            "arctan tau={tau}: tail {} vs asymptote {expect}",
            report.tail_value
        );

        // x f'(x) ~ 1/(tau^3 x^2) for softsign; the grid maximum sits at
        // the left end of the probe tail, x/2.
        let report = check_gate(GateKind::Softsign, tau, &grid).unwrap();
        let expect = 1.0 / (tau * tau * tau * (x / 2.0) * (x / 2.0));
        assert!(
            (report.tail_value / expect - 1.0).abs() < 0.05,
            "softsign tau={tau}: tail {} vs asymptote {expect}",
            report.tail_value
        );

        // The Gaussian tail underflows to an exact zero far out.
        let report = check_gate(GateKind::Erf, tau, &grid).unwrap();
        assert_eq!(report.tail_value, 0.0, "erf tau={tau}");
    }
}

#[test]
fn tail_values_scale_down_with_temperature() {
    let grid = ProbeGrid::default();
    for kind in [GateKind::Arctan, GateKind::Softsign] {
        let mut prev = f64::INFINITY;
        for tau in TAUS {
            let report = check_gate(kind, tau, &grid).unwrap();
            assert!(report.tail_value < prev, "{kind} tau={tau}");
            prev = report.tail_value;
        }
    }
}

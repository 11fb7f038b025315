//! Post-processing of sweep rows: the shifted SISO bound, equal-total-power
//! comparison and modulation comparison.

use std::fmt::Write as _;

use anyhow::Result;

use crate::config::ExperimentConfig;
use crate::stats::{ber_at_power, power_at_ber};
use crate::sweep::{sweep_ber, BerPoint};

/// Shift of the analytic two-branch combining bound.
pub const MRC_SHIFT_DB: f64 = 3.0;

/// SISO rows moved 3 dB to the left and relabeled. No combining receiver is
/// simulated; this is the reference curve only.
pub fn mrc_bound(rows: &[BerPoint]) -> Vec<BerPoint> {
    rows.iter()
        .filter(|r| r.configuration == "siso")
        .map(|r| BerPoint {
            configuration: "mrc_bound".to_string(),
            src_power_db: r.src_power_db - MRC_SHIFT_DB,
            ..r.clone()
        })
        .collect()
}

/// One relay-aided point set against the no-relay curve at equal total
/// transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerComparison {
    pub modulation: String,
    pub src_power_db: f64,
    pub relay_power_db: Option<f64>,
    pub total_power_db: f64,
    pub relay_ber: f64,
    /// No-relay BER interpolated at the total power.
    pub direct_ber: Option<f64>,
    /// Extra power the no-relay link needs to reach the relay-aided BER.
    pub gain_db: Option<f64>,
    /// Total power or matched BER outside the no-relay sweep.
    pub flagged: bool,
}

fn curve(rows: &[&BerPoint]) -> Vec<(f64, f64)> {
    let mut c: Vec<(f64, f64)> = rows.iter().map(|r| (r.total_power_db(), r.ber)).collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    c
}

/// Compare each `aided` row with the `direct` curve of the same modulation.
pub fn equal_power_compare(aided: &[BerPoint], direct: &[BerPoint]) -> Vec<PowerComparison> {
    aided
        .iter()
        .map(|a| {
            let same: Vec<&BerPoint> = direct.iter().filter(|d| d.modulation == a.modulation).collect();
            let c = curve(&same);
            let total = a.total_power_db();
            let direct_ber = ber_at_power(&c, total);
            let gain_db = power_at_ber(&c, a.ber).map(|p| p - total);
            PowerComparison {
                modulation: a.modulation.clone(),
                src_power_db: a.src_power_db,
                relay_power_db: a.relay_power_db,
                total_power_db: total,
                relay_ber: a.ber,
                direct_ber,
                gain_db,
                flagged: direct_ber.is_none() || gain_db.is_none(),
            }
        })
        .collect()
}

/// Horizontal distance between the two curves at `ber`, both against total
/// transmit power. Positive when the aided curve needs less power.
pub fn gain_at_ber(aided: &[BerPoint], direct: &[BerPoint], ber: f64) -> Option<f64> {
    let a: Vec<&BerPoint> = aided.iter().collect();
    let d: Vec<&BerPoint> = direct.iter().collect();
    Some(power_at_ber(&curve(&d), ber)? - power_at_ber(&curve(&a), ber)?)
}

pub const COMPARISON_HEADER: &str =
    "config_hash,modulation,src_power_db,relay_power_db,total_power_db,relay_ber,direct_ber,gain_db,flagged";

pub fn comparison_csv(config_hash: &str, rows: &[PowerComparison]) -> String {
    let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$e}")).unwrap_or_default();
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{config_hash},{},{:.2},{},{:.2},{:.6e},{},{},{}",
            r.modulation,
            r.src_power_db,
            r.relay_power_db.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.total_power_db,
            r.relay_ber,
            opt(r.direct_ber, 6),
            r.gain_db.map(|g| format!("{g:.3}")).unwrap_or_default(),
            r.flagged
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Relay-aided and relay-less sweeps at equal power, then the comparison.
pub fn compare_power(cfg: &ExperimentConfig) -> Result<(Vec<BerPoint>, Vec<BerPoint>, Vec<PowerComparison>)> {
    let mut c = cfg.clone();
    c.sweep.configurations = vec!["af1x1x1".into()];
    let aided = sweep_ber(&c)?;
    c.sweep.configurations = vec!["siso".into()];
    let direct = sweep_ber(&c)?;
    let table = equal_power_compare(&aided, &direct);
    Ok((aided, direct, table))
}

/// BPSK and QPSK, relay-aided and relay-less, all with the same number of
/// OFDM symbols per packet (BPSK packets carry half the bits).
pub fn modulation_compare(cfg: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    let mut c = cfg.clone();
    c.sweep.configurations = vec!["siso".into(), "af1x1x1".into()];
    c.sweep.modulations = vec!["bpsk".into(), "qpsk".into()];
    sweep_ber(&c)
}

/// Source powers at which relay-aided QPSK beats relay-less BPSK by more
/// than the two confidence half-widths.
pub fn qpsk_relay_beats_bpsk_direct(rows: &[BerPoint]) -> Vec<f64> {
    let find = |conf: &str, m: &str, p: f64| {
        rows.iter()
            .find(|r| r.configuration == conf && r.modulation == m && r.src_power_db == p)
    };
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.configuration == "af1x1x1" && r.modulation == "qpsk") {
        if let Some(d) = find("siso", "bpsk", r.src_power_db) {
            if r.ber + r.ci_halfwidth < d.ber - d.ci_halfwidth {
                out.push(r.src_power_db);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(conf: &str, p: f64, relay: Option<f64>, ber: f64) -> BerPoint {
        BerPoint {
            configuration: conf.into(),
            modulation: "bpsk".into(),
            src_power_db: p,
            relay_power_db: relay,
            packets: 10,
            bits: 1000,
            bit_errors: (ber * 1000.0) as usize,
            sync_failures: 0,
            ber,
            ci_halfwidth: 0.0,
        }
    }

    fn siso_curve() -> Vec<BerPoint> {
        (0..6).map(|i| row("siso", -10.0 + 2.0 * i as f64, None, 10f64.powf(-1.0 - 0.5 * i as f64))).collect()
    }

    #[test]
    fn bound_is_shifted_exactly_3_db() {
        let rows = siso_curve();
        let b = mrc_bound(&rows);
        assert_eq!(b.len(), rows.len());
        for (x, y) in rows.iter().zip(&b) {
            assert_eq!(x.src_power_db - y.src_power_db, 3.0);
            assert_eq!(x.ber, y.ber);
            assert_eq!(y.configuration, "mrc_bound");
        }
        assert!(mrc_bound(&[]).is_empty());
    }

    #[test]
    fn self_comparison_has_zero_gain() {
        let rows = siso_curve();
        for c in equal_power_compare(&rows, &rows).iter().filter(|c| !c.flagged) {
            assert!(c.gain_db.unwrap().abs() < 1e-9);
        }
        assert!(gain_at_ber(&rows, &rows, 1e-2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn silent_relay_has_zero_gain() {
        let direct = siso_curve();
        let aided: Vec<BerPoint> = direct
            .iter()
            .map(|d| row("af1x1x1", d.src_power_db, Some(f64::NEG_INFINITY), d.ber))
            .collect();
        for c in equal_power_compare(&aided, &direct).iter().filter(|c| !c.flagged) {
            assert_eq!(c.total_power_db, c.src_power_db);
            assert!(c.gain_db.unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn outside_range_is_flagged_not_extrapolated() {
        let direct = siso_curve();
        let aided = vec![row("af1x1x1", 5.0, Some(5.0), 1e-6)];
        let c = &equal_power_compare(&aided, &direct)[0];
        assert!(c.flagged);
        assert!(c.direct_ber.is_none() && c.gain_db.is_none());
    }

    #[test]
    fn total_power_sums_linearly() {
        let r = row("af1x1x1", -10.0, Some(-10.0), 0.1);
        assert!((r.total_power_db() - (-10.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
    }
}

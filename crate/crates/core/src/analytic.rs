//! Closed-form saturation-throughput model for DCF basic and RTS/CTS access.
//!
//! Solves the per-slot transmission probability fixed point for n saturated
//! stations under binary exponential backoff with a retry limit, then turns
//! it into normalized throughput. The simulator is validated against these
//! numbers, so both sides share the same timing source ([`channel_times`]).

use thiserror::Error;

/// Residual bound the fixed-point solver must reach before returning.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

const MAX_BISECTION_ITERS: u32 = 200;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("fixed point did not converge after {iterations} iterations (last residual {residual:e})")]
    SolverFailure { residual: f64, iterations: u32 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Air-time constants of the cell, in microseconds unless noted.
///
/// `eifs_us` is not stored: it is defined as SIFS + ACK + propagation delay
/// and exposed through [`PhyTimings::eifs_us`] so the identity can never
/// drift.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyTimings {
    pub slot_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub rts_us: f64,
    pub cts_us: f64,
    pub phy_header_us: f64,
    pub mac_header_bytes: u32,
    pub ack_us: f64,
    pub prop_delay_us: f64,
    pub payload_bytes: u32,
    pub data_rate_mbps: f64,
}

impl Default for PhyTimings {
    fn default() -> Self {
        Self {
            slot_us: 10.0,
            sifs_us: 16.0,
            difs_us: 34.0,
            rts_us: 46.0,
            cts_us: 38.0,
            phy_header_us: 20.0,
            mac_header_bytes: 60,
            ack_us: 40.0,
            prop_delay_us: 0.1,
            payload_bytes: 1500,
            data_rate_mbps: 6.0,
        }
    }
}

impl PhyTimings {
    /// Extended inter-frame space used after a failed transmission.
    pub fn eifs_us(&self) -> f64 {
        self.sifs_us + self.ack_us + self.prop_delay_us
    }

    /// Combined PHY and MAC header air time (symbol H).
    pub fn header_us(&self) -> f64 {
        self.phy_header_us + f64::from(self.mac_header_bytes) * 8.0 / self.data_rate_mbps
    }

    /// Payload air time (symbol E[P]).
    pub fn payload_us(&self) -> f64 {
        f64::from(self.payload_bytes) * 8.0 / self.data_rate_mbps
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        let positive = [
            ("slot_us", self.slot_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
            ("rts_us", self.rts_us),
            ("cts_us", self.cts_us),
            ("phy_header_us", self.phy_header_us),
            ("ack_us", self.ack_us),
            ("data_rate_mbps", self.data_rate_mbps),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(AnalyticError::InvalidParams(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        if !(self.prop_delay_us >= 0.0) || !self.prop_delay_us.is_finite() {
            return Err(AnalyticError::InvalidParams(format!(
                "prop_delay_us must be non-negative, got {}",
                self.prop_delay_us
            )));
        }
        if self.payload_bytes == 0 {
            return Err(AnalyticError::InvalidParams(
                "payload_bytes must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Binary-exponential-backoff parameters.
///
/// `m` is the number of window-doubling stages and must satisfy
/// `cw_max + 1 == (cw_min + 1) << m`; `retry_limit` is the number of
/// retransmissions before a frame is dropped (stages freeze at `m` while
/// retries keep counting when `retry_limit > m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackoffParams {
    pub cw_min: u32,
    pub cw_max: u32,
    pub m: u32,
    pub retry_limit: u32,
}

impl Default for BackoffParams {
    fn default() -> Self {
        Self { cw_min: 15, cw_max: 1023, m: 6, retry_limit: 6 }
    }
}

impl BackoffParams {
    /// Build from window bounds, inferring `m` and defaulting the retry
    /// limit to `m`.
    pub fn from_windows(cw_min: u32, cw_max: u32, retry_limit: Option<u32>) -> Result<Self, AnalyticError> {
        let m = infer_stage_count(cw_min, cw_max)?;
        let bp = Self { cw_min, cw_max, m, retry_limit: retry_limit.unwrap_or(m) };
        bp.validate()?;
        Ok(bp)
    }

    /// Minimum contention window size W0 = cw_min + 1 (the number of
    /// equally likely initial backoff values).
    pub fn w0(&self) -> f64 {
        f64::from(self.cw_min) + 1.0
    }

    /// Contention window after `stage` doublings, saturating at `cw_max`.
    pub fn cw_at_stage(&self, stage: u32) -> u32 {
        let doubled = (u64::from(self.cw_min) + 1) << stage.min(self.m);
        (doubled - 1).min(u64::from(self.cw_max)) as u32
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        let inferred = infer_stage_count(self.cw_min, self.cw_max)?;
        if inferred != self.m {
            return Err(AnalyticError::InvalidParams(format!(
                "m must equal log2((cw_max+1)/(cw_min+1)) = {inferred}, got {}",
                self.m
            )));
        }
        if self.retry_limit < self.m {
            return Err(AnalyticError::InvalidParams(format!(
                "retry_limit ({}) must be at least m ({})",
                self.retry_limit, self.m
            )));
        }
        Ok(())
    }
}

fn infer_stage_count(cw_min: u32, cw_max: u32) -> Result<u32, AnalyticError> {
    let lo = u64::from(cw_min) + 1;
    let hi = u64::from(cw_max) + 1;
    if cw_min == 0 || !lo.is_power_of_two() || !hi.is_power_of_two() || hi < lo {
        return Err(AnalyticError::InvalidParams(format!(
            "contention windows must satisfy cw_max+1 == (cw_min+1)*2^m with both powers of two, got cw_min={cw_min} cw_max={cw_max}"
        )));
    }
    Ok(hi.trailing_zeros() - lo.trailing_zeros())
}

/// DCF packet transmission scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessScheme {
    Basic,
    RtsCts,
}

impl AccessScheme {
    pub fn label(&self) -> &'static str {
        match self {
            AccessScheme::Basic => "basic",
            AccessScheme::RtsCts => "rts-cts",
        }
    }
}

/// Everything the model produces for one (n, scheme) point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticResult {
    pub tau: f64,
    pub p_w: f64,
    pub p_tr: f64,
    pub p_s: f64,
    pub t_s_us: f64,
    pub t_c_us: f64,
    pub s_normalized: f64,
    pub throughput_mbps: f64,
}

/// One row of [`sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: u32,
    pub scheme: AccessScheme,
    pub result: AnalyticResult,
}

/// Per-station transmission probability given a constant per-attempt
/// collision probability `p_w`.
///
/// This is the retry-limited window expression evaluated in the
/// algebraically equivalent form that divides the shared (1 - 2p) factor
/// out of the geometric sum, so it stays finite at p_w = 1/2.
fn tau_of_pw(p_w: f64, bp: &BackoffParams) -> f64 {
    let m = bp.m as i32;
    let r = bp.retry_limit as i32;
    // sum_{k=0}^{m} (2 p)^k
    let mut geo = 0.0;
    let mut term = 1.0;
    for _ in 0..=m {
        geo += term;
        term *= 2.0 * p_w;
    }
    let numer = geo * (1.0 - p_w)
        + 2f64.powi(m) * (p_w.powi(m + 1) - p_w.powi(r + 1));
    let denom = 1.0 - p_w.powi(r + 1);
    2.0 / (bp.w0() * (numer / denom) + 1.0)
}

/// Per-attempt collision probability seen by one of `n` stations when each
/// transmits independently with probability `tau`.
fn pw_of_tau(tau: f64, n: u32) -> f64 {
    1.0 - (1.0 - tau).powi(n as i32 - 1)
}

/// Residual of the composed map; the fixed point is its root in tau.
fn residual(tau: f64, n: u32, bp: &BackoffParams) -> f64 {
    tau - tau_of_pw(pw_of_tau(tau, n), bp)
}

/// Solve the (tau, p_w) fixed point by bisection on tau.
///
/// The composed map is monotone in tau, so the residual changes sign
/// exactly once on (0, 1) and bisection converges unconditionally.
pub fn solve_fixed_point(n: u32, bp: &BackoffParams) -> Result<(f64, f64), AnalyticError> {
    if n == 0 {
        return Err(AnalyticError::DegenerateInput("station count must be at least 1".into()));
    }
    bp.validate()?;

    let mut lo = 1e-12;
    let mut hi = 1.0 - 1e-12;
    if residual(lo, n, bp) > 0.0 {
        // Root sits below the bracket; only possible for pathological
        // parameters, report it instead of guessing.
        return Err(AnalyticError::SolverFailure { residual: residual(lo, n, bp), iterations: 0 });
    }
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if residual(mid, n, bp) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let res = residual(tau, n, bp);
    if res.abs() >= FIXED_POINT_TOLERANCE {
        return Err(AnalyticError::SolverFailure { residual: res, iterations: MAX_BISECTION_ITERS });
    }
    Ok((tau, pw_of_tau(tau, n)))
}

/// Channel occupancy (success, collision) in microseconds for one scheme.
pub fn channel_times(pt: &PhyTimings, scheme: AccessScheme) -> (f64, f64) {
    let h = pt.header_us();
    let ep = pt.payload_us();
    let d = pt.prop_delay_us;
    match scheme {
        AccessScheme::Basic => {
            let t_s = h + ep + pt.sifs_us + d + pt.ack_us + pt.difs_us + d;
            let t_c = h + ep + pt.eifs_us() + d;
            (t_s, t_c)
        }
        AccessScheme::RtsCts => {
            let t_s = pt.rts_us + pt.sifs_us + d + pt.cts_us + pt.sifs_us + d
                + h + ep + pt.sifs_us + d + pt.ack_us + pt.difs_us + d;
            let t_c = pt.rts_us + pt.eifs_us() + d;
            (t_s, t_c)
        }
    }
}

/// P_tr (at least one station transmits in a slot) and P_s (a transmission
/// is a success, conditioned on P_tr).
pub fn transmission_probabilities(n: u32, tau: f64) -> Result<(f64, f64), AnalyticError> {
    if n == 0 {
        return Err(AnalyticError::DegenerateInput("station count must be at least 1".into()));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(AnalyticError::DegenerateInput(format!(
            "tau must be in (0, 1], got {tau} (P_s is undefined at tau = 0)"
        )));
    }
    let p_tr = 1.0 - (1.0 - tau).powi(n as i32);
    let p_s = f64::from(n) * tau * (1.0 - tau).powi(n as i32 - 1) / p_tr;
    Ok((p_tr, p_s))
}

/// Normalized saturation throughput for `n` stations under `scheme`.
pub fn normalized_throughput(
    n: u32,
    pt: &PhyTimings,
    bp: &BackoffParams,
    scheme: AccessScheme,
) -> Result<AnalyticResult, AnalyticError> {
    pt.validate()?;
    let (tau, p_w) = solve_fixed_point(n, bp)?;
    let (t_s, t_c) = channel_times(pt, scheme);
    let (p_tr, p_s) = transmission_probabilities(n, tau)?;
    let ep = pt.payload_us();
    let sigma = pt.slot_us;
    let s = p_s * p_tr * ep
        / ((1.0 - p_tr) * sigma + p_tr * p_s * t_s + p_tr * (1.0 - p_s) * t_c);
    Ok(AnalyticResult {
        tau,
        p_w,
        p_tr,
        p_s,
        t_s_us: t_s,
        t_c_us: t_c,
        s_normalized: s,
        throughput_mbps: s * pt.data_rate_mbps,
    })
}

/// Model rows for every station count in `n_range`, both schemes.
pub fn sweep(
    n_range: impl IntoIterator<Item = u32>,
    pt: &PhyTimings,
    bp: &BackoffParams,
) -> Result<Vec<SweepRow>, AnalyticError> {
    let mut rows = Vec::new();
    for n in n_range {
        for scheme in [AccessScheme::Basic, AccessScheme::RtsCts] {
            rows.push(SweepRow { n, scheme, result: normalized_throughput(n, pt, bp, scheme)? });
        }
    }
    if rows.is_empty() {
        return Err(AnalyticError::DegenerateInput("empty station range".into()));
    }
    Ok(rows)
}

/// CSV header for [`write_sweep_csv`].
pub const SWEEP_CSV_HEADER: &str = "n,scheme,tau,p_w,p_tr,p_s,t_s_us,t_c_us,s_norm,throughput_mbps";

/// Emit sweep rows as CSV with 11 significant digits per float.
pub fn write_sweep_csv(rows: &[SweepRow], out: &mut (impl std::io::Write + ?Sized)) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let r = &row.result;
        writeln!(
            out,
            "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            row.n, row.scheme.label(), r.tau, r.p_w, r.p_tr, r.p_s, r.t_s_us, r.t_c_us,
            r.s_normalized, r.throughput_mbps,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_station_tau_is_two_over_seventeen() {
        let (tau, p_w) = solve_fixed_point(1, &BackoffParams::default()).unwrap();
        assert!(close(tau, 2.0 / 17.0, 1e-14), "tau = {tau}");
        assert_eq!(p_w, 0.0);
    }

    #[test]
    fn collision_probability_direct_substitution() {
        // n = 2, tau = 0.5 fed through the collision map.
        assert!(close(pw_of_tau(0.5, 2), 0.5, 1e-15));
    }

    #[test]
    fn fixed_point_golden_n10() {
        // Golden values frozen from an independent high-precision bisection
        // of the composed map at cw_min=15, cw_max=1023, m=6, R=6.
        let (tau, p_w) = solve_fixed_point(10, &BackoffParams::default()).unwrap();
        assert!(close(tau, 0.053307681388963064, 1e-12), "tau = {tau}");
        assert!(close(p_w, 0.389227211756871730, 1e-12), "p_w = {p_w}");
    }

    #[test]
    fn fixed_point_residual_small_for_all_n() {
        let bp = BackoffParams::default();
        for n in 1..=50 {
            let (tau, _) = solve_fixed_point(n, &bp).unwrap();
            let res = residual(tau, n, &bp);
            assert!(res.abs() < FIXED_POINT_TOLERANCE, "n={n} residual={res:e}");
        }
    }

    #[test]
    fn collision_probability_monotone_in_n() {
        let bp = BackoffParams::default();
        let mut prev = -1.0;
        for n in 1..=50 {
            let (tau, p_w) = solve_fixed_point(n, &bp).unwrap();
            assert!(tau > 0.0 && tau <= 1.0);
            assert!(p_w >= prev, "p_w decreased at n={n}: {p_w} < {prev}");
            prev = p_w;
        }
    }

    #[test]
    fn channel_times_match_hand_arithmetic() {
        // Default timings, 6 Mb/s, 1500-byte payload:
        // H = 20 + 60*8/6 = 100 us, E[P] = 2000 us, EIFS = 56.1 us.
        let pt = PhyTimings::default();
        assert!(close(pt.header_us(), 100.0, 1e-12));
        assert!(close(pt.payload_us(), 2000.0, 1e-12));
        assert!(close(pt.eifs_us(), 56.1, 1e-12));

        let (t_s_bas, t_c_bas) = channel_times(&pt, AccessScheme::Basic);
        assert!(close(t_s_bas, 2190.2, 1e-9), "t_s_bas = {t_s_bas}");
        assert!(close(t_c_bas, 2156.2, 1e-9), "t_c_bas = {t_c_bas}");

        let (t_s_rts, t_c_rts) = channel_times(&pt, AccessScheme::RtsCts);
        assert!(close(t_s_rts, 2306.4, 1e-9), "t_s_rts = {t_s_rts}");
        assert!(close(t_c_rts, 102.2, 1e-9), "t_c_rts = {t_c_rts}");
    }

    #[test]
    fn success_and_collision_gap_is_payload_independent_for_basic() {
        let mut pt = PhyTimings::default();
        let (s1, c1) = channel_times(&pt, AccessScheme::Basic);
        pt.payload_bytes = 12000;
        let (s2, c2) = channel_times(&pt, AccessScheme::Basic);
        assert!(close(s1 - c1, s2 - c2, 1e-9));
    }

    #[test]
    fn rts_collision_cheaper_when_frame_exceeds_rts() {
        let pt = PhyTimings::default();
        let (_, t_c_bas) = channel_times(&pt, AccessScheme::Basic);
        let (_, t_c_rts) = channel_times(&pt, AccessScheme::RtsCts);
        assert!(pt.payload_us() + pt.header_us() > pt.rts_us);
        assert!(t_c_rts < t_c_bas);
    }

    #[test]
    fn transmission_probabilities_direct_cases() {
        let (p_tr, p_s) = transmission_probabilities(2, 0.5).unwrap();
        assert!(close(p_tr, 0.75, 1e-15));
        assert!(close(p_s, 2.0 / 3.0, 1e-15));

        let (p_tr, p_s) = transmission_probabilities(1, 0.3).unwrap();
        assert!(close(p_tr, 0.3, 1e-15));
        assert!(close(p_s, 1.0, 1e-15));

        assert!(transmission_probabilities(1, 0.0).is_err());
    }

    #[test]
    fn transmission_probabilities_match_binomial_enumeration() {
        // Brute-force oracle: walk all 2^20 transmit patterns.
        let n = 20u32;
        let tau = 0.05f64;
        // Kahan-compensated sums: a million tiny terms otherwise lose
        // enough precision to mask real errors.
        let mut p_any = 0.0;
        let mut c_any = 0.0;
        let mut p_single = 0.0;
        for mask in 0u32..(1 << n) {
            let k = mask.count_ones();
            let p = tau.powi(k as i32) * (1.0 - tau).powi((n - k) as i32);
            if k >= 1 {
                let y = p - c_any;
                let t = p_any + y;
                c_any = (t - p_any) - y;
                p_any = t;
            }
            if k == 1 {
                p_single += p;
            }
        }
        let (p_tr, p_s) = transmission_probabilities(n, tau).unwrap();
        assert!(close(p_tr, p_any, 1e-12), "p_tr {p_tr} vs {p_any}");
        assert!(close(p_s, p_single / p_any, 1e-12), "p_s {p_s} vs {}", p_single / p_any);
    }

    #[test]
    fn single_station_matches_renewal_cycle_form() {
        // With one station there are no collisions and throughput reduces to
        // E[P] / (T_s + sigma * (W0 - 1) / 2).
        let pt = PhyTimings::default();
        let bp = BackoffParams::default();
        for scheme in [AccessScheme::Basic, AccessScheme::RtsCts] {
            let r = normalized_throughput(1, &pt, &bp, scheme).unwrap();
            let (t_s, _) = channel_times(&pt, scheme);
            let expected = pt.payload_us() / (t_s + pt.slot_us * (bp.w0() - 1.0) / 2.0);
            assert!(close(r.s_normalized, expected, 1e-12), "{scheme:?}: {} vs {expected}", r.s_normalized);
        }
    }

    #[test]
    fn throughput_independent_of_collision_cost_when_ps_is_one() {
        // The (1 - P_s) term vanishes, so T_c cannot matter at n = 1.
        let bp = BackoffParams::default();
        let pt = PhyTimings::default();
        let a = normalized_throughput(1, &pt, &bp, AccessScheme::Basic).unwrap();
        let (t_s, _) = channel_times(&pt, AccessScheme::Basic);
        let ep = pt.payload_us();
        let sigma = pt.slot_us;
        let (p_tr, p_s) = transmission_probabilities(1, a.tau).unwrap();
        for fake_t_c in [0.0, 1e6] {
            let s = p_s * p_tr * ep
                / ((1.0 - p_tr) * sigma + p_tr * p_s * t_s + p_tr * (1.0 - p_s) * fake_t_c);
            assert!(close(s, a.s_normalized, 1e-12));
        }
    }

    #[test]
    fn basic_throughput_decreases_with_contention() {
        let pt = PhyTimings::default();
        let bp = BackoffParams::default();
        let mut prev = f64::INFINITY;
        for n in [2, 5, 10, 20, 30] {
            let r = normalized_throughput(n, &pt, &bp, AccessScheme::Basic).unwrap();
            assert!(r.s_normalized > 0.0 && r.s_normalized < 1.0);
            assert!(r.s_normalized < prev, "S did not decrease at n={n}");
            prev = r.s_normalized;
        }
    }

    #[test]
    fn sweep_shape_and_single_user_ordering() {
        let pt = PhyTimings::default();
        let bp = BackoffParams::default();
        let rows = sweep([1], &pt, &bp).unwrap();
        assert_eq!(rows.len(), 2);

        let rows = sweep(1..=30, &pt, &bp).unwrap();
        assert_eq!(rows.len(), 60);
        for row in &rows {
            let r = &row.result;
            for p in [r.tau, r.p_w, r.p_tr, r.p_s] {
                assert!((0.0..=1.0).contains(&p));
            }
            assert!(r.s_normalized > 0.0 && r.s_normalized < 1.0);
            assert!(close(r.throughput_mbps, r.s_normalized * pt.data_rate_mbps, 1e-12));
        }

        // A lone station pays the RTS/CTS handshake for nothing.
        let basic_1 = &rows[0];
        let rts_1 = &rows[1];
        assert_eq!((basic_1.n, basic_1.scheme), (1, AccessScheme::Basic));
        assert!(basic_1.result.s_normalized > rts_1.result.s_normalized);
    }

    #[test]
    fn sweep_csv_has_documented_header_and_digits() {
        let rows = sweep([1], &PhyTimings::default(), &BackoffParams::default()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_CSV_HEADER);
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,basic,"));
        // 10 fractional digits in scientific notation = 11 significant digits.
        assert!(first.contains("e"), "expected scientific notation: {first}");
    }

    #[test]
    fn backoff_params_validation() {
        assert!(BackoffParams::from_windows(15, 1023, None).is_ok());
        let bp = BackoffParams::from_windows(15, 1023, None).unwrap();
        assert_eq!(bp.m, 6);
        assert_eq!(bp.retry_limit, 6);
        assert!(BackoffParams::from_windows(15, 1000, None).is_err());
        assert!(BackoffParams::from_windows(0, 1023, None).is_err());
        assert!(BackoffParams { cw_min: 15, cw_max: 1023, m: 5, retry_limit: 6 }.validate().is_err());
        assert!(BackoffParams { cw_min: 15, cw_max: 1023, m: 6, retry_limit: 3 }.validate().is_err());
        assert_eq!(bp.cw_at_stage(0), 15);
        assert_eq!(bp.cw_at_stage(1), 31);
        assert_eq!(bp.cw_at_stage(6), 1023);
        assert_eq!(bp.cw_at_stage(9), 1023);
    }

    #[test]
    fn phy_validation_rejects_nonpositive_durations() {
        let mut pt = PhyTimings::default();
        pt.slot_us = 0.0;
        assert!(pt.validate().is_err());
        let mut pt = PhyTimings::default();
        pt.prop_delay_us = -0.1;
        assert!(pt.validate().is_err());
        assert!(PhyTimings::default().validate().is_ok());
    }
}

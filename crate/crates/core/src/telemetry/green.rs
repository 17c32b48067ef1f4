use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::{synthesize_log, LogDraft, LogRecord, TemplateKey};
use crate::scenario::GreenConfig;
use crate::topology::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GreenKind {
    Logon,
    FailedLogon,
    FileAccess,
    ProcessStart,
    Connection,
    Logoff,
    ServiceTicket,
    DecoyTraffic,
}

impl GreenKind {
    pub const ALL: [GreenKind; 8] = [
        GreenKind::Logon,
        GreenKind::FailedLogon,
        GreenKind::FileAccess,
        GreenKind::ProcessStart,
        GreenKind::Connection,
        GreenKind::Logoff,
        GreenKind::ServiceTicket,
        GreenKind::DecoyTraffic,
    ];
}

pub fn is_business_hour(cfg: &GreenConfig, tick: f64) -> bool {
    let hour = (tick.floor() as i64).rem_euclid(24) as u32;
    (cfg.day_start..cfg.day_end).contains(&hour)
}

/// Benign event rate per tick at time `tick`.
pub fn intensity(cfg: &GreenConfig, tick: f64) -> f64 {
    if !cfg.enabled {
        0.0
    } else if is_business_hour(cfg, tick) {
        cfg.lambda_day
    } else {
        cfg.lambda_night
    }
}

/// Arrival times and kinds on `(t0, t1]`, sampled by thinning a homogeneous
/// process at the peak rate.
pub fn green_arrivals<R: Rng + ?Sized>(t0: f64, t1: f64, cfg: &GreenConfig, rng: &mut R) -> Vec<(f64, GreenKind)> {
    let peak = if cfg.enabled { cfg.lambda_day.max(cfg.lambda_night) } else { 0.0 };
    let span = t1 - t0;
    if !(span > 0.0) || peak <= 0.0 {
        return Vec::new();
    }
    let candidates = match Poisson::new(peak * span) {
        Ok(p) => p.sample(rng) as usize,
        Err(_) => 0,
    };
    let mut times: Vec<f64> = (0..candidates).map(|_| t1 - rng.random::<f64>() * span).collect();
    times.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(times.len());
    for t in times {
        let keep = intensity(cfg, t) / peak;
        if keep >= 1.0 || rng.random::<f64>() < keep {
            out.push((t, GreenKind::ALL[rng.random_range(0..GreenKind::ALL.len())]));
        }
    }
    out
}

/// Benign records on `(t0, t1]`, each on a uniformly chosen host.
pub fn green_noise<R: Rng + ?Sized>(t0: f64, t1: f64, cfg: &GreenConfig, topology: &Topology, rng: &mut R) -> Vec<LogRecord> {
    let arrivals = green_arrivals(t0, t1, cfg, rng);
    arrivals
        .into_iter()
        .map(|(t, kind)| {
            let draft = LogDraft {
                node: rng.random_range(0..topology.node_count()),
                template: TemplateKey::Green(kind),
                detail: None,
            };
            synthesize_log(&draft, t, topology, rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, GREEN};

    #[test]
    fn business_hours_are_eight_to_twenty() {
        let cfg = GreenConfig::default();
        assert!(!is_business_hour(&cfg, 7.99));
        assert!(is_business_hour(&cfg, 8.0));
        assert!(is_business_hour(&cfg, 19.5));
        assert!(!is_business_hour(&cfg, 20.0));
        assert!(is_business_hour(&cfg, 24.0 + 9.0));
    }

    #[test]
    fn zero_rate_gives_nothing() {
        let cfg = GreenConfig {
            lambda_day: 0.0,
            lambda_night: 0.0,
            ..Default::default()
        };
        let mut rng = stream(0, GREEN);
        assert!(green_arrivals(0.0, 100.0, &cfg, &mut rng).is_empty());
    }

    #[test]
    fn arrivals_stay_inside_the_window_in_order() {
        let cfg = GreenConfig::default();
        let mut rng = stream(3, GREEN);
        let a = green_arrivals(10.0, 11.0, &cfg, &mut rng);
        assert!(a.iter().all(|(t, _)| *t > 10.0 && *t <= 11.0));
        assert!(a.windows(2).all(|w| w[0].0 <= w[1].0));
    }
}

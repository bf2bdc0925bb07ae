//! Stochastic photon streams and pair correlation.
//!
//! [`simulate_trajectory`] runs the three-level model as an exact jump
//! process (Gillespie): draw an exponential waiting time for the total rate
//! out of the current state, pick the destination in proportion to the
//! competing rates, and record a timestamp on every radiative decay. Each
//! recorded photon then survives an independent detection-efficiency coin
//! flip. The coin is tossed even at efficiency 1 so that two runs with the
//! same seed but different efficiencies walk through identical state
//! trajectories; the lower-efficiency record is a thinned subset of the
//! other.
//!
//! [`correlate`] turns a photon record into a g2 histogram: every ordered
//! photon pair with delay below `max_tau` increments the bin holding its
//! delay, and the count expected for uncorrelated (Poisson) arrivals,
//! `rate^2 * duration * bin_width` with the measured rate, normalizes the
//! result so an ideal coherent stream reads 1 in every bin.

use crate::exec;
use crate::kinetics::ThreeLevelRates;
use crate::rng::{exp_wait, substream, Stream};
use crate::{ensure_finite, Error, Result};

/// One simulated detection record.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonRecord {
    /// Detection times in ns, strictly increasing.
    pub timestamps: Vec<f64>,
    /// Observation window in ns; timestamps all lie in [0, duration].
    pub duration_ns: f64,
    /// Probability that an emitted photon was recorded.
    pub detection_efficiency: f64,
    /// Base seed of the run that produced this record.
    pub seed: u64,
}

impl PhotonRecord {
    /// Validated record: positive duration, efficiency in [0, 1], and
    /// strictly increasing timestamps inside the observation window.
    pub fn new(
        timestamps: Vec<f64>,
        duration_ns: f64,
        detection_efficiency: f64,
        seed: u64,
    ) -> Result<Self> {
        if !duration_ns.is_finite() || duration_ns <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "duration_ns must be positive, got {duration_ns}"
            )));
        }
        if !(0.0..=1.0).contains(&detection_efficiency) {
            return Err(Error::InvalidParameter(format!(
                "detection_efficiency must lie in [0, 1], got {detection_efficiency}"
            )));
        }
        for (i, &t) in timestamps.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || t > duration_ns {
                return Err(Error::InvalidParameter(format!(
                    "timestamp {i} = {t} outside [0, {duration_ns}]"
                )));
            }
            if i > 0 && t <= timestamps[i - 1] {
                return Err(Error::InvalidParameter(format!(
                    "timestamps must be strictly increasing; index {i} holds {t} after {}",
                    timestamps[i - 1]
                )));
            }
        }
        Ok(Self {
            timestamps,
            duration_ns,
            detection_efficiency,
            seed,
        })
    }

    /// Mean detected count rate in photons per ns.
    pub fn rate(&self) -> f64 {
        if self.duration_ns > 0.0 {
            self.timestamps.len() as f64 / self.duration_ns
        } else {
            0.0
        }
    }
}

/// Delay histogram of photon pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    /// Bin edges in ns; bin `k` covers `[edges[k], edges[k + 1])`.
    pub bin_edges: Vec<f64>,
    /// Photon pairs per bin.
    pub counts: Vec<u64>,
    /// Pairs per bin expected from an uncorrelated stream at the measured
    /// rate. Zero for an empty record.
    pub normalization: f64,
}

impl CorrelationHistogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    /// Bin centers in ns.
    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]))
            .collect()
    }

    /// Counts divided by the uncorrelated expectation: an estimate of
    /// g2 at each bin center. All zeros when the record was empty.
    pub fn normalized(&self) -> Vec<f64> {
        if self.normalization <= 0.0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / self.normalization)
            .collect()
    }

    /// Standard error of each normalized bin, from Poisson counting
    /// statistics. Bins with zero counts get the error of one count so
    /// they remain usable in chi-square-style comparisons.
    pub fn standard_errors(&self) -> Vec<f64> {
        if self.normalization <= 0.0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| (c.max(1) as f64).sqrt() / self.normalization)
            .collect()
    }

    /// Fold another histogram with identical binning into this one.
    /// Counts and uncorrelated expectations both add, so `normalized`
    /// stays an unbiased g2 estimate for the pooled data.
    pub fn merge(&mut self, other: &CorrelationHistogram) -> Result<()> {
        if self.bin_edges != other.bin_edges {
            return Err(Error::InvalidParameter(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.normalization += other.normalization;
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Level {
    Ground,
    Excited,
    Dark,
}

/// Exact stochastic trajectory of the pumped three-level emitter over
/// `duration_ns`, starting in the ground state.
pub fn simulate_trajectory(
    rates: &ThreeLevelRates,
    duration_ns: f64,
    detection_efficiency: f64,
    seed: u64,
) -> Result<PhotonRecord> {
    simulate_stream(rates, duration_ns, detection_efficiency, seed, 0)
}

/// Independent trajectories drawn from substreams `(seed, 0..count)`.
/// Runs trajectories in parallel under the `parallel` feature; the records
/// are identical either way.
pub fn simulate_ensemble(
    rates: &ThreeLevelRates,
    count: usize,
    duration_ns: f64,
    detection_efficiency: f64,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    validate_trajectory_args(rates, duration_ns, detection_efficiency)?;
    Ok(exec::map_chunks(count, 1, |r| {
        run_stream(rates, duration_ns, detection_efficiency, seed, r.start as u64)
    }))
}

/// Sequential reference for [`simulate_ensemble`]; used by benchmarks and
/// the determinism tests.
pub fn simulate_ensemble_seq(
    rates: &ThreeLevelRates,
    count: usize,
    duration_ns: f64,
    detection_efficiency: f64,
    seed: u64,
) -> Result<Vec<PhotonRecord>> {
    validate_trajectory_args(rates, duration_ns, detection_efficiency)?;
    Ok(exec::map_chunks_seq(count, 1, |r| {
        run_stream(rates, duration_ns, detection_efficiency, seed, r.start as u64)
    }))
}

fn validate_trajectory_args(
    rates: &ThreeLevelRates,
    duration_ns: f64,
    detection_efficiency: f64,
) -> Result<()> {
    rates.validate()?;
    ensure_finite("duration_ns", duration_ns)?;
    if duration_ns <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "duration_ns must be positive, got {duration_ns}"
        )));
    }
    ensure_finite("detection_efficiency", detection_efficiency)?;
    if !(0.0..=1.0).contains(&detection_efficiency) {
        return Err(Error::InvalidParameter(format!(
            "detection_efficiency must lie in [0, 1], got {detection_efficiency}"
        )));
    }
    Ok(())
}

fn simulate_stream(
    rates: &ThreeLevelRates,
    duration_ns: f64,
    detection_efficiency: f64,
    seed: u64,
    stream: u64,
) -> Result<PhotonRecord> {
    validate_trajectory_args(rates, duration_ns, detection_efficiency)?;
    Ok(run_stream(
        rates,
        duration_ns,
        detection_efficiency,
        seed,
        stream,
    ))
}

fn run_stream(
    rates: &ThreeLevelRates,
    duration_ns: f64,
    detection_efficiency: f64,
    seed: u64,
    stream: u64,
) -> PhotonRecord {
    use rand::Rng;
    let mut rng: Stream = substream(seed, stream);
    let mut timestamps = Vec::new();
    let mut level = Level::Ground;
    let mut t = 0.0_f64;
    loop {
        match level {
            Level::Ground => {
                if rates.pump == 0.0 {
                    break;
                }
                t += exp_wait(&mut rng, rates.pump);
                level = Level::Excited;
            }
            Level::Excited => {
                let total = rates.radiative + rates.shelve;
                if total == 0.0 {
                    break;
                }
                t += exp_wait(&mut rng, total);
                if t > duration_ns {
                    break;
                }
                if rng.random::<f64>() * total < rates.radiative {
                    level = Level::Ground;
                    // The detection coin is always tossed; see module docs.
                    let detected = rng.random::<f64>() < detection_efficiency;
                    if detected && timestamps.last().is_none_or(|&last| t > last) {
                        timestamps.push(t);
                    }
                } else {
                    level = Level::Dark;
                }
            }
            Level::Dark => {
                if rates.deshelve == 0.0 {
                    break;
                }
                t += exp_wait(&mut rng, rates.deshelve);
                level = Level::Ground;
            }
        }
        if t > duration_ns {
            break;
        }
    }
    PhotonRecord {
        timestamps,
        duration_ns,
        detection_efficiency,
        seed,
    }
}

/// Histogram of delays between all ordered photon pairs closer than
/// `max_tau_ns`, normalized against a Poisson stream at the record's
/// measured rate. `max_tau_ns` is rounded to a whole number of bins.
/// An empty or single-photon record yields all-zero counts, not an error.
pub fn correlate(
    record: &PhotonRecord,
    bin_width_ns: f64,
    max_tau_ns: f64,
) -> Result<CorrelationHistogram> {
    correlate_impl(record, bin_width_ns, max_tau_ns, true)
}

/// Sequential reference for [`correlate`]. The parallel path merges
/// per-chunk integer counts in chunk order, so both paths are exactly
/// equal; this exists for benchmarks.
pub fn correlate_seq(
    record: &PhotonRecord,
    bin_width_ns: f64,
    max_tau_ns: f64,
) -> Result<CorrelationHistogram> {
    correlate_impl(record, bin_width_ns, max_tau_ns, false)
}

fn correlate_impl(
    record: &PhotonRecord,
    bin_width_ns: f64,
    max_tau_ns: f64,
    parallel: bool,
) -> Result<CorrelationHistogram> {
    ensure_finite("bin_width_ns", bin_width_ns)?;
    ensure_finite("max_tau_ns", max_tau_ns)?;
    if bin_width_ns <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bin_width_ns must be positive, got {bin_width_ns}"
        )));
    }
    if max_tau_ns < bin_width_ns {
        return Err(Error::InvalidParameter(format!(
            "max_tau_ns ({max_tau_ns}) must be at least one bin width ({bin_width_ns})"
        )));
    }
    let n_bins = ((max_tau_ns / bin_width_ns).round() as usize).max(1);
    let span = n_bins as f64 * bin_width_ns;
    let edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 * bin_width_ns).collect();

    let ts = &record.timestamps;
    let n = ts.len();
    // Forward sweep per chunk of start photons; chunks are independent and
    // the integer merge is order-exact, so parallel == sequential.
    let chunk = 4096;
    let scan = |range: std::ops::Range<usize>| {
        let mut counts = vec![0u64; n_bins];
        for i in range {
            let start = ts[i];
            for &later in &ts[i + 1..] {
                let tau = later - start;
                if tau >= span {
                    break;
                }
                let mut bin = (tau / bin_width_ns) as usize;
                // Guards float roundoff at the last edge.
                if bin >= n_bins {
                    bin = n_bins - 1;
                }
                counts[bin] += 1;
            }
        }
        counts
    };
    let partials = if parallel {
        exec::map_chunks(n, chunk, scan)
    } else {
        exec::map_chunks_seq(n, chunk, scan)
    };
    let mut counts = vec![0u64; n_bins];
    for partial in partials {
        for (total, c) in counts.iter_mut().zip(partial) {
            *total += c;
        }
    }

    let rate = record.rate();
    let normalization = rate * rate * record.duration_ns * bin_width_ns;
    Ok(CorrelationHistogram {
        bin_edges: edges,
        counts,
        normalization,
    })
}

/// Correlate each record separately and pool the histograms. Records never
/// contribute cross-pairs, so independent trajectories can be combined
/// into one g2 estimate.
pub fn correlate_ensemble(
    records: &[PhotonRecord],
    bin_width_ns: f64,
    max_tau_ns: f64,
) -> Result<CorrelationHistogram> {
    let Some((first, rest)) = records.split_first() else {
        return Err(Error::InsufficientData(
            "no photon records to correlate".into(),
        ));
    };
    let mut total = correlate(first, bin_width_ns, max_tau_ns)?;
    for record in rest {
        total.merge(&correlate(record, bin_width_ns, max_tau_ns)?)?;
    }
    Ok(total)
}

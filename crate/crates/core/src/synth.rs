//! Synthetic vibration data from multi-story shear-building models.
//!
//! Stories are lumped masses chained by lateral story stiffnesses, excited by
//! independent white-noise forces at every story. Damage is a stiffness
//! reduction at one story. Integration discretizes the continuous state-space
//! system exactly once per run with a matrix exponential, so the sampled
//! response is the analytic solution under zero-order-hold forcing and needs
//! no step-size tuning.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::signals::ChannelRecord;
use crate::{Error, Result};

const STATE_LIMIT: f64 = 1e12;

/// Lumped-parameter shear building under white-noise force excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub dof_count: usize,
    /// Story masses, ground floor first.
    pub masses: Vec<f64>,
    /// Lateral stiffness of each story relative to the one below.
    pub story_stiffnesses: Vec<f64>,
    /// Modal damping ratio imposed on the first two modes.
    pub damping_ratio: f64,
    /// Stories carrying accelerometers; their indices become channel ids.
    pub sensor_dofs: Vec<usize>,
    pub sampling_rate_hz: f64,
    /// Per-sample standard deviation of each story force.
    pub excitation_std: f64,
}

/// Stiffness reduction at one story; factor 1 leaves the structure intact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageSpec {
    pub story_index: usize,
    pub stiffness_factor: f64,
}

impl DamageSpec {
    pub fn validate(&self, dof_count: usize) -> Result<()> {
        if self.story_index >= dof_count {
            return Err(Error::InvalidParameter(format!(
                "damage story {} out of range for {} stories",
                self.story_index, dof_count
            )));
        }
        if !(self.stiffness_factor > 0.0 && self.stiffness_factor <= 1.0)
            || !self.stiffness_factor.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "stiffness factor must be in (0, 1], got {}",
                self.stiffness_factor
            )));
        }
        Ok(())
    }
}

impl StructureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dof_count == 0 {
            return Err(Error::InvalidParameter("structure needs at least one story".to_string()));
        }
        if self.masses.len() != self.dof_count {
            return Err(Error::InvalidParameter(format!(
                "{} masses for {} stories",
                self.masses.len(),
                self.dof_count
            )));
        }
        if self.story_stiffnesses.len() != self.dof_count {
            return Err(Error::InvalidParameter(format!(
                "{} story stiffnesses for {} stories",
                self.story_stiffnesses.len(),
                self.dof_count
            )));
        }
        if self.masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter("masses must be positive and finite".to_string()));
        }
        if self
            .story_stiffnesses
            .iter()
            .any(|&k| !(k > 0.0) || !k.is_finite())
        {
            return Err(Error::InvalidParameter(
                "story stiffnesses must be positive and finite".to_string(),
            ));
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping ratio must be in (0, 1), got {}",
                self.damping_ratio
            )));
        }
        if !(self.sampling_rate_hz > 0.0) || !self.sampling_rate_hz.is_finite() {
            return Err(Error::InvalidSamplingRate(self.sampling_rate_hz));
        }
        if !(self.excitation_std > 0.0) || !self.excitation_std.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "excitation std must be positive, got {}",
                self.excitation_std
            )));
        }
        if self.sensor_dofs.is_empty() {
            return Err(Error::InvalidParameter("no sensor stories listed".to_string()));
        }
        let mut seen = vec![false; self.dof_count];
        for &dof in &self.sensor_dofs {
            if dof >= self.dof_count {
                return Err(Error::InvalidParameter(format!(
                    "sensor story {dof} out of range for {} stories",
                    self.dof_count
                )));
            }
            if seen[dof] {
                return Err(Error::InvalidParameter(format!("duplicate sensor story {dof}")));
            }
            seen[dof] = true;
        }
        Ok(())
    }

    /// Returns a copy with one story's stiffness scaled down.
    pub fn with_damage(&self, damage: &DamageSpec) -> Result<StructureSpec> {
        self.validate()?;
        damage.validate(self.dof_count)?;
        let mut spec = self.clone();
        spec.story_stiffnesses[damage.story_index] *= damage.stiffness_factor;
        Ok(spec)
    }

    /// Undamped natural frequencies in Hz, ascending.
    pub fn natural_frequencies_hz(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = self.dof_count;
        let k = stiffness_matrix(&self.story_stiffnesses);
        let mut normalized = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                normalized[(i, j)] = k[(i, j)] / (self.masses[i] * self.masses[j]).sqrt();
            }
        }
        let eigen = SymmetricEigen::new(normalized);
        let mut freqs: Vec<f64> = eigen
            .eigenvalues
            .iter()
            .map(|&lambda| lambda.max(0.0).sqrt() / (2.0 * std::f64::consts::PI))
            .collect();
        freqs.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        Ok(freqs)
    }
}

/// Tridiagonal shear-building stiffness matrix: each story couples to its
/// neighbors through the story stiffness between them.
fn stiffness_matrix(stiffnesses: &[f64]) -> DMatrix<f64> {
    let n = stiffnesses.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] += stiffnesses[i];
        if i + 1 < n {
            k[(i, i)] += stiffnesses[i + 1];
            k[(i, i + 1)] = -stiffnesses[i + 1];
            k[(i + 1, i)] = -stiffnesses[i + 1];
        }
    }
    k
}

struct SystemMatrices {
    /// Discrete state transition over one sample interval.
    ad: DMatrix<f64>,
    /// Discrete force-to-state map over one sample interval.
    bd: DMatrix<f64>,
    m_inv_k: DMatrix<f64>,
    m_inv_c: DMatrix<f64>,
    masses: DVector<f64>,
}

/// Builds the exact one-step discretization of the damped structure via the
/// matrix exponential of the augmented state-force system.
fn system_matrices(spec: &StructureSpec, damage: Option<&DamageSpec>) -> Result<SystemMatrices> {
    let spec = match damage {
        Some(d) => spec.with_damage(d)?,
        None => {
            spec.validate()?;
            spec.clone()
        }
    };
    let n = spec.dof_count;
    let dt = 1.0 / spec.sampling_rate_hz;

    let freqs = spec.natural_frequencies_hz()?;
    let omega1 = 2.0 * std::f64::consts::PI * freqs[0];
    let (alpha, beta) = if n == 1 {
        (2.0 * spec.damping_ratio * omega1, 0.0)
    } else {
        let omega2 = 2.0 * std::f64::consts::PI * freqs[1];
        (
            2.0 * spec.damping_ratio * omega1 * omega2 / (omega1 + omega2),
            2.0 * spec.damping_ratio / (omega1 + omega2),
        )
    };

    let k = stiffness_matrix(&spec.story_stiffnesses);
    let masses = DVector::from_vec(spec.masses.clone());
    let mut m_inv_k = k.clone();
    let mut m_inv_c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m_inv_k[(i, j)] /= masses[i];
            m_inv_c[(i, j)] = (alpha * if i == j { masses[i] } else { 0.0 } + beta * k[(i, j)])
                / masses[i];
        }
    }

    let mut augmented = DMatrix::<f64>::zeros(3 * n, 3 * n);
    for i in 0..n {
        augmented[(i, n + i)] = dt;
        augmented[(n + i, 2 * n + i)] = dt / masses[i];
        for j in 0..n {
            augmented[(n + i, j)] = -m_inv_k[(i, j)] * dt;
            augmented[(n + i, n + j)] = -m_inv_c[(i, j)] * dt;
        }
    }
    let phi = augmented.exp();
    let ad = phi.view((0, 0), (2 * n, 2 * n)).into_owned();
    let bd = phi.view((0, 2 * n), (2 * n, n)).into_owned();

    Ok(SystemMatrices {
        ad,
        bd,
        m_inv_k,
        m_inv_c,
        masses,
    })
}

/// Simulates the structure under white-noise story forces and returns the
/// acceleration record of every sensor story.
///
/// Deterministic for a given seed; an optional damage spec scales one story's
/// stiffness for the whole run.
pub fn simulate(
    spec: &StructureSpec,
    damage: Option<&DamageSpec>,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<ChannelRecord>> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    let steps = (duration_s * spec.sampling_rate_hz).round() as usize;
    if steps == 0 {
        return Err(Error::InvalidParameter(format!(
            "duration {duration_s} s yields no samples at {} Hz",
            spec.sampling_rate_hz
        )));
    }

    let mats = system_matrices(spec, damage)?;
    let n = spec.dof_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.excitation_std).expect("validated std");

    let mut state = DVector::<f64>::zeros(2 * n);
    let mut force = DVector::<f64>::zeros(n);
    let mut channels: Vec<Vec<f64>> = vec![Vec::with_capacity(steps); spec.sensor_dofs.len()];

    for step in 0..steps {
        for i in 0..n {
            force[i] = noise.sample(&mut rng);
        }
        let accel = force.component_div(&mats.masses)
            - &mats.m_inv_c * state.rows(n, n)
            - &mats.m_inv_k * state.rows(0, n);
        for (c, &dof) in spec.sensor_dofs.iter().enumerate() {
            channels[c].push(accel[dof]);
        }
        state = &mats.ad * &state + &mats.bd * &force;
        if state.amax() > STATE_LIMIT {
            return Err(Error::UnstableSimulation {
                step,
                limit: STATE_LIMIT,
            });
        }
    }

    Ok(spec
        .sensor_dofs
        .iter()
        .zip(channels)
        .map(|(&dof, samples)| ChannelRecord {
            channel_id: dof,
            samples,
            sampling_rate_hz: spec.sampling_rate_hz,
        })
        .collect())
}

/// Source structure of the default transfer fixture: a squat 4-story frame.
pub fn default_source_spec() -> StructureSpec {
    StructureSpec {
        dof_count: 4,
        masses: vec![1.0; 4],
        story_stiffnesses: vec![155_000.0; 4],
        damping_ratio: 0.002,
        sensor_dofs: vec![0, 1, 2, 3],
        sampling_rate_hz: 256.0,
        excitation_std: 1.0,
    }
}

/// Target structure of the default transfer fixture: a taller, stiffer
/// 6-story frame sampled twice as fast, instrumented at four stories.
pub fn default_target_spec() -> StructureSpec {
    StructureSpec {
        dof_count: 6,
        masses: vec![1.0; 6],
        story_stiffnesses: vec![590_000.0; 6],
        damping_ratio: 0.002,
        sensor_dofs: vec![0, 2, 3, 5],
        sampling_rate_hz: 512.0,
        excitation_std: 1.0,
    }
}

/// Everything that defines a two-structure transfer fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub source: StructureSpec,
    pub target: StructureSpec,
    /// Stiffness factors simulated as damage cases on both structures.
    pub damage_factors: Vec<f64>,
    pub source_damage_story: usize,
    pub target_damage_story: usize,
    pub source_healthy_duration_s: f64,
    pub source_damage_duration_s: f64,
    pub target_healthy_duration_s: f64,
    pub target_damage_duration_s: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            source: default_source_spec(),
            target: default_target_spec(),
            damage_factors: vec![0.9, 0.7, 0.5],
            source_damage_story: 0,
            target_damage_story: 2,
            source_healthy_duration_s: 960.0,
            source_damage_duration_s: 120.0,
            target_healthy_duration_s: 800.0,
            target_damage_duration_s: 120.0,
        }
    }
}

/// Generated records for one source structure and one dissimilar target
/// structure, healthy plus one case per damage factor each.
#[derive(Debug, Clone)]
pub struct TlFixture {
    pub config: FixtureConfig,
    pub source_healthy: Vec<ChannelRecord>,
    pub source_damage: Vec<(DamageSpec, Vec<ChannelRecord>)>,
    pub target_healthy: Vec<ChannelRecord>,
    pub target_damage: Vec<(DamageSpec, Vec<ChannelRecord>)>,
}

/// Generates the default two-structure transfer fixture.
pub fn make_tl_fixture(seed: u64) -> Result<TlFixture> {
    make_tl_fixture_with(&FixtureConfig::default(), seed)
}

/// Generates a transfer fixture from an explicit configuration; every case
/// gets its own excitation stream derived deterministically from the seed.
pub fn make_tl_fixture_with(config: &FixtureConfig, seed: u64) -> Result<TlFixture> {
    config.source.validate()?;
    config.target.validate()?;
    if config.source.sensor_dofs.len() != config.target.sensor_dofs.len() {
        return Err(Error::ChannelMismatch {
            context: "fixture sensor counts".to_string(),
            expected: config.source.sensor_dofs.len(),
            found: config.target.sensor_dofs.len(),
        });
    }
    if config.damage_factors.is_empty() {
        return Err(Error::InvalidParameter("no damage factors listed".to_string()));
    }

    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut next_seed = move || seeder.random::<u64>();

    let source_healthy = simulate(
        &config.source,
        None,
        config.source_healthy_duration_s,
        next_seed(),
    )?;
    let mut source_damage = Vec::new();
    for &factor in &config.damage_factors {
        let damage = DamageSpec {
            story_index: config.source_damage_story,
            stiffness_factor: factor,
        };
        let records = simulate(
            &config.source,
            Some(&damage),
            config.source_damage_duration_s,
            next_seed(),
        )?;
        source_damage.push((damage, records));
    }

    let target_healthy = simulate(
        &config.target,
        None,
        config.target_healthy_duration_s,
        next_seed(),
    )?;
    let mut target_damage = Vec::new();
    for &factor in &config.damage_factors {
        let damage = DamageSpec {
            story_index: config.target_damage_story,
            stiffness_factor: factor,
        };
        let records = simulate(
            &config.target,
            Some(&damage),
            config.target_damage_duration_s,
            next_seed(),
        )?;
        target_damage.push((damage, records));
    }

    Ok(TlFixture {
        config: config.clone(),
        source_healthy,
        source_damage,
        target_healthy,
        target_damage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_dof_spec() -> StructureSpec {
        StructureSpec {
            dof_count: 2,
            masses: vec![1.0, 1.0],
            story_stiffnesses: vec![1.0, 1.0],
            damping_ratio: 0.05,
            sensor_dofs: vec![0, 1],
            sampling_rate_hz: 16.0,
            excitation_std: 1.0,
        }
    }

    #[test]
    fn two_story_unit_chain_has_golden_ratio_frequencies() {
        let freqs = two_dof_spec().natural_frequencies_hz().unwrap();
        let expected_low = ((3.0 - 5.0f64.sqrt()) / 2.0).sqrt() / (2.0 * std::f64::consts::PI);
        let expected_high = ((3.0 + 5.0f64.sqrt()) / 2.0).sqrt() / (2.0 * std::f64::consts::PI);
        assert_eq!(freqs.len(), 2);
        assert!((freqs[0] - expected_low).abs() < 1e-12);
        assert!((freqs[1] - expected_high).abs() < 1e-12);
    }

    #[test]
    fn identity_damage_reproduces_the_healthy_run_exactly() {
        let spec = two_dof_spec();
        let damage = DamageSpec {
            story_index: 0,
            stiffness_factor: 1.0,
        };
        let healthy = simulate(&spec, None, 2.0, 9).unwrap();
        let damaged = simulate(&spec, Some(&damage), 2.0, 9).unwrap();
        assert_eq!(healthy.len(), damaged.len());
        for (h, d) in healthy.iter().zip(&damaged) {
            assert_eq!(h.samples, d.samples);
        }
    }

    #[test]
    fn softer_stories_lower_the_fundamental_frequency() {
        let spec = default_source_spec();
        let healthy_f1 = spec.natural_frequencies_hz().unwrap()[0];
        let mut last = healthy_f1;
        for factor in [0.9, 0.7, 0.5] {
            let damaged = spec
                .with_damage(&DamageSpec {
                    story_index: 0,
                    stiffness_factor: factor,
                })
                .unwrap();
            let f1 = damaged.natural_frequencies_hz().unwrap()[0];
            assert!(f1 < last, "factor {factor}: {f1} !< {last}");
            last = f1;
        }

        let upper_story = two_dof_spec()
            .with_damage(&DamageSpec {
                story_index: 1,
                stiffness_factor: 0.5,
            })
            .unwrap();
        assert!(
            upper_story.natural_frequencies_hz().unwrap()[0]
                < two_dof_spec().natural_frequencies_hz().unwrap()[0]
        );
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let spec = two_dof_spec();
        let a = simulate(&spec, None, 1.0, 42).unwrap();
        let b = simulate(&spec, None, 1.0, 42).unwrap();
        let c = simulate(&spec, None, 1.0, 43).unwrap();

        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.samples, y.samples);
        }
        assert_ne!(a[0].samples, c[0].samples);
        assert_eq!(a[0].channel_id, 0);
        assert_eq!(a[1].channel_id, 1);
        assert_eq!(a[0].samples.len(), 16);
        assert_eq!(a[0].sampling_rate_hz, 16.0);
    }

    #[test]
    fn free_response_energy_never_increases() {
        let spec = default_source_spec();
        let mats = system_matrices(&spec, None).unwrap();
        let stiffness = stiffness_matrix(&spec.story_stiffnesses);
        let n = spec.dof_count;

        let mut state = DVector::<f64>::zeros(2 * n);
        state[n] = 1.0;
        let energy = |s: &DVector<f64>| {
            let u = s.rows(0, n).into_owned();
            let v = s.rows(n, n).into_owned();
            0.5 * v
                .iter()
                .zip(spec.masses.iter())
                .map(|(vi, mi)| mi * vi * vi)
                .sum::<f64>()
                + 0.5 * (&stiffness * &u).dot(&u)
        };

        let mut last = energy(&state);
        let initial = last;
        for _ in 0..2000 {
            state = &mats.ad * &state;
            let e = energy(&state);
            assert!(e <= last * (1.0 + 1e-12), "energy increased: {e} > {last}");
            last = e;
        }
        assert!(last < 0.5 * initial, "damping removed too little energy");
    }

    #[test]
    fn halving_the_step_leaves_sampled_accelerations_unchanged() {
        let spec = two_dof_spec();
        let n = spec.dof_count;
        let coarse = system_matrices(&spec, None).unwrap();

        let mut fine_spec = spec.clone();
        fine_spec.sampling_rate_hz *= 2.0;
        let fine = system_matrices(&fine_spec, None).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let steps = 1024;

        let accel_of = |mats: &SystemMatrices, state: &DVector<f64>, force: &DVector<f64>| {
            force.component_div(&mats.masses)
                - &mats.m_inv_c * state.rows(n, n)
                - &mats.m_inv_k * state.rows(0, n)
        };

        let mut coarse_state = DVector::<f64>::zeros(2 * n);
        let mut fine_state = DVector::<f64>::zeros(2 * n);
        let mut sum_sq = 0.0;
        let mut diff_sq = 0.0;
        for _ in 0..steps {
            let force = DVector::from_fn(n, |_, _| noise.sample(&mut rng));

            let a_coarse = accel_of(&coarse, &coarse_state, &force);
            let a_fine = accel_of(&fine, &fine_state, &force);
            sum_sq += a_coarse.norm_squared();
            diff_sq += (&a_coarse - &a_fine).norm_squared();

            coarse_state = &coarse.ad * &coarse_state + &coarse.bd * &force;
            fine_state = &fine.ad * &fine_state + &fine.bd * &force;
            fine_state = &fine.ad * &fine_state + &fine.bd * &force;
        }
        let rel = (diff_sq / sum_sq).sqrt();
        assert!(rel < 0.01, "sampled response drifted by {rel}");
    }

    #[test]
    fn invalid_structures_and_damage_are_rejected() {
        let mut wrong_len = two_dof_spec();
        wrong_len.masses = vec![1.0];
        assert!(wrong_len.validate().is_err());

        let mut bad_mass = two_dof_spec();
        bad_mass.masses[0] = 0.0;
        assert!(bad_mass.validate().is_err());

        let mut bad_damping = two_dof_spec();
        bad_damping.damping_ratio = 0.0;
        assert!(bad_damping.validate().is_err());
        bad_damping.damping_ratio = 1.0;
        assert!(bad_damping.validate().is_err());

        let mut dup_sensor = two_dof_spec();
        dup_sensor.sensor_dofs = vec![1, 1];
        assert!(dup_sensor.validate().is_err());

        let mut oob_sensor = two_dof_spec();
        oob_sensor.sensor_dofs = vec![2];
        assert!(oob_sensor.validate().is_err());

        let spec = two_dof_spec();
        assert!(spec
            .with_damage(&DamageSpec {
                story_index: 2,
                stiffness_factor: 0.5
            })
            .is_err());
        assert!(spec
            .with_damage(&DamageSpec {
                story_index: 0,
                stiffness_factor: 0.0
            })
            .is_err());
        assert!(spec
            .with_damage(&DamageSpec {
                story_index: 0,
                stiffness_factor: 1.5
            })
            .is_err());
        assert!(simulate(&spec, None, 0.0, 1).is_err());
    }

    fn quick_fixture_config() -> FixtureConfig {
        FixtureConfig {
            source_healthy_duration_s: 24.0,
            source_damage_duration_s: 8.0,
            target_healthy_duration_s: 24.0,
            target_damage_duration_s: 8.0,
            ..FixtureConfig::default()
        }
    }

    #[test]
    fn fixture_pairs_dissimilar_structures_with_matched_sensor_counts() {
        let fixture = make_tl_fixture_with(&quick_fixture_config(), 77).unwrap();

        assert_ne!(fixture.config.source.dof_count, fixture.config.target.dof_count);
        assert_ne!(
            fixture.config.source.sampling_rate_hz,
            fixture.config.target.sampling_rate_hz
        );
        assert_ne!(
            fixture.config.source.story_stiffnesses[0],
            fixture.config.target.story_stiffnesses[0]
        );
        assert_eq!(fixture.source_healthy.len(), fixture.target_healthy.len());

        assert_eq!(fixture.source_damage.len(), 3);
        assert_eq!(fixture.target_damage.len(), 3);
        for ((damage, records), factor) in fixture.source_damage.iter().zip([0.9, 0.7, 0.5]) {
            assert_eq!(damage.stiffness_factor, factor);
            assert_eq!(damage.story_index, 0);
            assert_eq!(records.len(), 4);
        }
        for (damage, _) in &fixture.target_damage {
            assert_eq!(damage.story_index, 2);
        }

        let again = make_tl_fixture_with(&quick_fixture_config(), 77).unwrap();
        assert_eq!(
            fixture.source_healthy[0].samples,
            again.source_healthy[0].samples
        );
        let other = make_tl_fixture_with(&quick_fixture_config(), 78).unwrap();
        assert_ne!(
            fixture.source_healthy[0].samples,
            other.source_healthy[0].samples
        );
    }

    #[test]
    fn fixture_spectra_disagree_in_line_ordering() {
        let fixture = make_tl_fixture_with(&quick_fixture_config(), 123).unwrap();
        let w = 256;
        let source = crate::spectral::features_from_records(&fixture.source_healthy, w, 10.0).unwrap();
        let target = crate::spectral::features_from_records(&fixture.target_healthy, w, 10.0).unwrap();

        let argsort = |values: &[f64]| {
            let mut idx: Vec<usize> = (0..values.len()).collect();
            idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
            idx
        };
        let channel_power = |features: &[crate::spectral::FeatureVector], c: usize| {
            let lines = features[0].lines_per_channel();
            let mut power = vec![0.0f64; lines];
            for f in features {
                for (p, &x) in power.iter_mut().zip(f.channel(c)) {
                    *p += x * x;
                }
            }
            power
        };

        let mut differing = 0usize;
        let mut total = 0usize;
        for c in 0..source[0].channel_count() {
            let ss_order = argsort(&channel_power(&source, c));
            let ts_order = argsort(&channel_power(&target, c));
            differing += ss_order
                .iter()
                .zip(&ts_order)
                .filter(|(a, b)| a != b)
                .count();
            total += ss_order.len();
        }
        assert!(
            differing * 2 >= total,
            "fixtures too similar: only {differing} of {total} ranks differ"
        );
    }
}

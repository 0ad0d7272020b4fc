//! Exhaustive-enumeration oracles for every closed-form error expression in
//! [`crate::analytic`], plus the check runner behind the `oracle` CLI
//! subcommand.
//!
//! The oracles never call the closed forms they validate: they enumerate all
//! 2^N flip masks over an instance's stored bits, decode each corrupted
//! pattern through the format codecs, and reduce exactly. Enumeration work
//! is bucketed by mask popcount so one pass serves every probability in a
//! grid: P(mask) depends only on its flip count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytic::{
    self, MseBreakdown, NeuronInstance, NoiseDistribution,
};
use crate::fault::{corrupted_distribution, mask_probability, SpecialPolicy};
use crate::formats::{
    AffineQuantLayerParams, BitWord, FloatFormat, IntFormat, LutTable, NumericFormat,
};
use crate::recovery;

/// Largest joint-mask width the default oracle run will enumerate.
pub const DEFAULT_BUDGET_BITS: u32 = 18;

const P_GRID: [f64; 6] = [0.0, 0.01, 0.1, 0.5, 0.9, 1.0];

/// Accumulate per-popcount sums of `K` statistics over every flip mask of
/// `total_bits` bits. `buckets[c][k]` is the sum of statistic k over all
/// masks with popcount c.
fn enumerate_buckets<const K: usize>(
    total_bits: u32,
    mut eval: impl FnMut(u64) -> [f64; K],
) -> Vec<[f64; K]> {
    assert!(total_bits <= 24, "oracle enumeration capped at 24 bits");
    let mut buckets = vec![[0.0; K]; total_bits as usize + 1];
    for mask in 0..(1u64 << total_bits) {
        let stats = eval(mask);
        let bucket = &mut buckets[mask.count_ones() as usize];
        for k in 0..K {
            bucket[k] += stats[k];
        }
    }
    buckets
}

/// Collapse popcount buckets at a specific flip probability.
fn combine<const K: usize>(buckets: &[[f64; K]], p: f64) -> [f64; K] {
    let total_bits = (buckets.len() - 1) as u32;
    let mut out = [0.0; K];
    for (count, bucket) in buckets.iter().enumerate() {
        let prob = mask_probability(p, count as u32, total_bits);
        for k in 0..K {
            out[k] += prob * bucket[k];
        }
    }
    out
}

/// Per-word decode table: value of every corrupted bit pattern.
fn decode_table(word: &BitWord, fmt: &NumericFormat) -> Vec<f64> {
    let width = word.width();
    (0..(1u64 << width))
        .map(|mask| {
            let corrupted = word.xor(&BitWord::new(mask, width).unwrap()).unwrap();
            fmt.decode(&corrupted).unwrap().to_f64()
        })
        .collect()
}

/// Joint enumeration of a neuron's output error over every flip pattern of
/// all weight words. Precomputes popcount buckets; `mse(p)` and `mean(p)`
/// are then exact reductions.
pub struct NeuronEnumeration {
    buckets: Vec<[f64; 2]>, // [dy^2, dy]
}

impl NeuronEnumeration {
    pub fn new(neuron: &NeuronInstance, fmt: &NumericFormat) -> Self {
        let width = fmt.width();
        let tables: Vec<Vec<f64>> = neuron
            .weight_words
            .iter()
            .map(|w| decode_table(w, fmt))
            .collect();
        let total_bits = u32::from(width) * neuron.fan_in() as u32;
        let word_mask = (1u64 << width) - 1;
        let buckets = enumerate_buckets(total_bits, |mask| {
            let mut dy = 0.0;
            for (i, table) in tables.iter().enumerate() {
                let sub = (mask >> (i as u32 * u32::from(width))) & word_mask;
                dy += neuron.inputs[i] * (table[sub as usize] - neuron.clean_weights[i]);
            }
            [dy * dy, dy]
        });
        Self { buckets }
    }

    pub fn mse(&self, p: f64) -> f64 {
        combine(&self.buckets, p)[0]
    }

    pub fn mean_error(&self, p: f64) -> f64 {
        combine(&self.buckets, p)[1]
    }
}

/// Joint enumeration for a fully corrupted affine-quantized neuron:
/// weights, zero point, and scale flip together.
pub struct AqEnumeration {
    buckets: Vec<[f64; 4]>, // [(y'-y)^2, h, h^2, y']
    clean_h: f64,
}

impl AqEnumeration {
    pub fn new(neuron: &NeuronInstance, params: &AffineQuantLayerParams) -> Self {
        let bw = params.weight_fmt().bits();
        let bz = params.zero_fmt().bits();
        let bs = params.scale_fmt().width();
        let weight_tables: Vec<Vec<f64>> = neuron
            .weight_words
            .iter()
            .map(|w| decode_table(w, &NumericFormat::Int(*params.weight_fmt())))
            .collect();
        let zero_table = decode_table(params.zero_word(), &NumericFormat::Int(*params.zero_fmt()));
        let scale_table = decode_table(
            params.scale_word(),
            &NumericFormat::Float(*params.scale_fmt()),
        );
        let n = neuron.fan_in() as u32;
        let total_bits = n * u32::from(bw) + u32::from(bz) + u32::from(bs);
        let input_sum: f64 = neuron.inputs.iter().sum();
        let wmask = (1u64 << bw) - 1;
        let zmask = (1u64 << bz) - 1;
        let smask = (1u64 << bs) - 1;
        let eval = |mask: u64| -> (f64, f64) {
            let mut acc = 0.0;
            for (i, table) in weight_tables.iter().enumerate() {
                let sub = (mask >> (i as u32 * u32::from(bw))) & wmask;
                acc += neuron.inputs[i] * table[sub as usize];
            }
            let zsub = (mask >> (n * u32::from(bw))) & zmask;
            let h = acc - zero_table[zsub as usize] * input_sum;
            let ssub = (mask >> (n * u32::from(bw) + u32::from(bz))) & smask;
            (h, scale_table[ssub as usize] * h)
        };
        // The clean reference goes through the identical expression so the
        // zero-mask error is exactly zero, not an evaluation-order residue.
        let (clean_h, clean_y) = eval(0);
        let buckets = enumerate_buckets(total_bits, |mask| {
            let (h, y) = eval(mask);
            let dy = y - clean_y;
            [dy * dy, h, h * h, y]
        });
        Self { buckets, clean_h }
    }

    pub fn mse(&self, p: f64) -> f64 {
        combine(&self.buckets, p)[0]
    }

    /// Variance of the accumulation H', via its enumerated first and second
    /// moments.
    pub fn accumulation_variance(&self, p: f64) -> f64 {
        let [_, h, h2, _] = combine(&self.buckets, p);
        h2 - h * h
    }

    pub fn clean_h(&self) -> f64 {
        self.clean_h
    }
}

/// Relative error with a floor on the denominator so exact zeros compare
/// cleanly against enumeration residue.
pub fn rel_err(a: f64, b: f64, scale_floor: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(scale_floor);
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

/// Result of one oracle identity check.
#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: u32,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub budget_bits: u32,
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// One line per identity: name, instance count, worst relative error,
    /// verdict.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("oracle budget: {} bits\n", self.budget_bits));
        for c in &self.checks {
            out.push_str(&format!(
                "{:<28} instances={:<6} max_rel_err={:.3e} tol={:.1e} {}\n",
                c.name,
                c.instances,
                c.max_rel_err,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
        let verdict = if self.all_pass() { "ALL PASS" } else { "FAILURES PRESENT" };
        out.push_str(&format!("oracle verdict: {verdict}\n"));
        out
    }
}

/// Deliberate closed-form perturbations, used as negative controls by the
/// test suite: a perturbed formula must surface as a FAIL line.
#[derive(Debug, Clone, Copy)]
pub enum InjectedFault {
    /// Multiply the integer closed-form MSE by the given factor.
    IntMseScale(f64),
}

struct CheckAccumulator {
    name: &'static str,
    instances: u32,
    max_rel_err: f64,
    tolerance: f64,
}

impl CheckAccumulator {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, instances: 0, max_rel_err: 0.0, tolerance }
    }

    fn observe(&mut self, err: f64) {
        self.instances += 1;
        if err > self.max_rel_err {
            self.max_rel_err = err;
        }
    }

    fn finish(self) -> OracleCheck {
        OracleCheck {
            name: self.name,
            instances: self.instances,
            max_rel_err: self.max_rel_err,
            tolerance: self.tolerance,
            pass: self.max_rel_err <= self.tolerance,
        }
    }
}

pub fn run_checks(budget_bits: u32) -> OracleReport {
    run_checks_with_fault(budget_bits, None)
}

pub fn run_checks_with_fault(budget_bits: u32, fault: Option<InjectedFault>) -> OracleReport {
    let budget = budget_bits.min(20);
    let mut checks = Vec::new();
    checks.push(check_int_mse(budget, fault));
    checks.push(check_float_word_moments());
    checks.push(check_float_neuron_mse(budget));
    checks.push(check_aq_protected(budget));
    checks.push(check_aq_variance(budget));
    checks.push(check_aq_full_mse(budget));
    checks.push(check_bnn(budget));
    checks.push(check_relu());
    checks.push(check_sigmoid_step_limit());
    checks.push(check_sigmoid_high_temperature());
    checks.push(check_lut_isolation());
    checks.push(check_recovery_alpha());
    checks.push(check_depth_recursion());
    OracleReport { budget_bits: budget, checks }
}

fn seeded_rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xFA17_0000 ^ tag)
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn random_inputs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Integer closed form vs joint enumeration: B in 1..=6, n in 1..=3,
/// 20 seeded instances per cell, the standard p grid.
fn check_int_mse(budget: u32, fault: Option<InjectedFault>) -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-int-mse", 1e-10);
    let scale = match fault {
        Some(InjectedFault::IntMseScale(s)) => s,
        None => 1.0,
    };
    for bits in 1..=6u8 {
        let fmt = IntFormat::new(bits).unwrap();
        for n in 1..=3usize {
            if n as u32 * u32::from(bits) > budget {
                continue;
            }
            let mut rng = seeded_rng(u64::from(bits) * 10 + n as u64);
            for _ in 0..20 {
                let inputs = random_inputs(&mut rng, n);
                let words: Vec<BitWord> = (0..n)
                    .map(|_| {
                        fmt.encode(rng.random_range(fmt.min_value()..=fmt.max_value())).unwrap()
                    })
                    .collect();
                let neuron = NeuronInstance::from_words(
                    inputs,
                    words,
                    &NumericFormat::Int(fmt),
                )
                .unwrap();
                let enumeration = NeuronEnumeration::new(&neuron, &NumericFormat::Int(fmt));
                for p in [0.0, 0.01, 0.1, 0.5, 1.0] {
                    let closed = analytic::int_neuron_mse(&neuron, &fmt, p).unwrap().total * scale;
                    acc.observe(rel_err(closed, enumeration.mse(p), 1e-30));
                }
            }
        }
    }
    acc.finish()
}

/// Per-word product moments vs exact single-word enumeration, every stored
/// pattern of each small extended format.
fn check_float_word_moments() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-float-moments", 1e-10);
    for (e, m) in [(2u8, 1u8), (2, 2), (3, 2), (4, 3)] {
        let fmt = FloatFormat::extended(e, m).unwrap();
        let nf = NumericFormat::Float(fmt);
        for bits in 0..(1u64 << fmt.width()) {
            let word = BitWord::new(bits, fmt.width()).unwrap();
            // Scale floor: mean absolute decoded value across all patterns,
            // so sign-cancelled means compare against achievable precision.
            let table = decode_table(&word, &nf);
            let abs_scale =
                table.iter().map(|v| v.abs()).sum::<f64>() / table.len() as f64;
            for p in P_GRID {
                let (gamma, omega) = analytic::float_weight_moments(&word, &fmt, p).unwrap();
                let dist = corrupted_distribution(&word, &nf, p).unwrap();
                let (mean, second) = dist.moments(SpecialPolicy::DropMass).unwrap();
                acc.observe(rel_err(gamma, mean, abs_scale));
                acc.observe(rel_err(omega, second, abs_scale * abs_scale));
            }
        }
    }
    acc.finish()
}

fn check_float_neuron_mse(budget: u32) -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-float-neuron-mse", 1e-10);
    for (e, m) in [(2u8, 1u8), (2, 2), (3, 2), (4, 3)] {
        let fmt = FloatFormat::extended(e, m).unwrap();
        let nf = NumericFormat::Float(fmt);
        let n = 2usize;
        if n as u32 * u32::from(fmt.width()) > budget {
            continue;
        }
        let mut rng = seeded_rng(0x2F00 + u64::from(e) * 16 + u64::from(m));
        for _ in 0..6 {
            let inputs = random_inputs(&mut rng, n);
            let words: Vec<BitWord> = (0..n)
                .map(|_| BitWord::new(rng.random_range(0..(1u64 << fmt.width())), fmt.width()).unwrap())
                .collect();
            let neuron = NeuronInstance::from_words(inputs, words, &nf).unwrap();
            let enumeration = NeuronEnumeration::new(&neuron, &nf);
            for p in P_GRID {
                let closed = analytic::float_neuron_mse(&neuron, &fmt, p).unwrap().total;
                acc.observe(rel_err(closed, enumeration.mse(p), 1e-30));
            }
        }
    }
    acc.finish()
}

fn aq_test_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    bw: u8,
    bz: u8,
    scale_fmt: FloatFormat,
    scale: f64,
) -> (NeuronInstance, AffineQuantLayerParams) {
    let weight_fmt = IntFormat::new(bw).unwrap();
    let zero_fmt = IntFormat::new(bz).unwrap();
    let params = AffineQuantLayerParams::new(
        scale_fmt.encode(scale).unwrap(),
        scale_fmt,
        zero_fmt
            .encode(rng.random_range(zero_fmt.min_value()..=zero_fmt.max_value()))
            .unwrap(),
        zero_fmt,
        weight_fmt,
    )
    .unwrap();
    let inputs = random_inputs(rng, n);
    let words: Vec<BitWord> = (0..n)
        .map(|_| {
            weight_fmt
                .encode(rng.random_range(weight_fmt.min_value()..=weight_fmt.max_value()))
                .unwrap()
        })
        .collect();
    let neuron =
        NeuronInstance::from_words(inputs, words, &NumericFormat::Int(weight_fmt)).unwrap();
    (neuron, params)
}

/// Protected-parameter AQ: closed form vs enumeration over weight masks, and
/// the exact S^2 reduction to the integer closed form.
fn check_aq_protected(budget: u32) -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-aq-protected", 1e-10);
    let scale_fmt = FloatFormat::extended(3, 2).unwrap();
    let mut rng = seeded_rng(0xA901);
    for _ in 0..8 {
        let (neuron, params) = aq_test_instance(&mut rng, 2, 3, 3, scale_fmt, 0.5);
        if 2 * 3 > budget {
            continue;
        }
        let weight_fmt = *params.weight_fmt();
        let enumeration =
            NeuronEnumeration::new(&neuron, &NumericFormat::Int(weight_fmt));
        let s_sq = params.scale() * params.scale();
        for p in P_GRID {
            let closed = analytic::aq_protected_mse(&neuron, &params, p).unwrap();
            // Against enumeration of the underlying integer error.
            acc.observe(rel_err(closed.total, s_sq * enumeration.mse(p), 1e-30));
            // Exact reduction: S^2 times the integer closed form.
            let int_closed = analytic::int_neuron_mse(&neuron, &weight_fmt, p).unwrap();
            let reduced = int_closed.scaled(s_sq);
            acc.observe(rel_err(closed.total, reduced.total, 1e-30));
        }
    }
    acc.finish()
}

fn check_aq_variance(budget: u32) -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-aq-accum-variance", 1e-10);
    let scale_fmt = FloatFormat::extended(2, 1).unwrap();
    let mut rng = seeded_rng(0xA902);
    for _ in 0..8 {
        let (neuron, params) = aq_test_instance(&mut rng, 2, 3, 2, scale_fmt, 1.0);
        let total = 2 * 3 + 2 + u32::from(scale_fmt.width());
        if total > budget {
            continue;
        }
        let enumeration = AqEnumeration::new(&neuron, &params);
        for p in P_GRID {
            let closed =
                analytic::aq_corrupted_accumulation_variance(&neuron, &params, p).unwrap();
            acc.observe(rel_err(closed, enumeration.accumulation_variance(p), 1e-12));
        }
    }
    acc.finish()
}

fn check_aq_full_mse(budget: u32) -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-aq-full-mse", 1e-10);
    let mut rng = seeded_rng(0xA903);
    // Small instances keep the joint space at or under 16 bits, e.g.
    // n=2, B_w=3: 6 weight bits + 3 zero bits + 5 scale bits = 14.
    let scale_fmt = FloatFormat::extended(2, 2).unwrap();
    for _ in 0..8 {
        let (neuron, params) = aq_test_instance(&mut rng, 2, 3, 3, scale_fmt, 0.75);
        let total = 2 * 3 + 3 + u32::from(scale_fmt.width());
        if total > budget {
            continue;
        }
        let enumeration = AqEnumeration::new(&neuron, &params);
        for p in P_GRID {
            let closed = analytic::aq_corrupted_full_mse(&neuron, &params, p).unwrap();
            acc.observe(rel_err(closed.total, enumeration.mse(p), 1e-30));
        }
    }
    // The spec's degenerate single-weight instance.
    let scale_fmt = FloatFormat::extended(2, 1).unwrap();
    let (neuron, params) = aq_test_instance(&mut rng, 1, 2, 1, scale_fmt, 1.5);
    let enumeration = AqEnumeration::new(&neuron, &params);
    for p in P_GRID {
        let closed = analytic::aq_corrupted_full_mse(&neuron, &params, p).unwrap();
        acc.observe(rel_err(closed.total, enumeration.mse(p), 1e-30));
    }
    acc.finish()
}

fn check_bnn(budget: u32) -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-bnn-mse", 1e-10);
    for n in [1usize, 2, 4, 8] {
        if n as u32 > budget {
            continue;
        }
        let mut rng = seeded_rng(0xB100 + n as u64);
        for _ in 0..10 {
            let inputs = random_inputs(&mut rng, n);
            let words: Vec<BitWord> = (0..n)
                .map(|_| BitWord::new(u64::from(rng.random::<bool>()), 1).unwrap())
                .collect();
            let neuron =
                NeuronInstance::from_words(inputs, words, &NumericFormat::Binary).unwrap();
            let enumeration = NeuronEnumeration::new(&neuron, &NumericFormat::Binary);
            for p in [0.0, 0.01, 0.1, 0.5, 1.0] {
                let closed = analytic::bnn_neuron_mse(&neuron, p).unwrap().total;
                acc.observe(rel_err(closed, enumeration.mse(p), 1e-30));
            }
        }
    }
    // Spot value: x=[1], w=[+1], p=0.5 -> MSE 2.
    let neuron = NeuronInstance::from_words(
        vec![1.0],
        vec![BitWord::new(1, 1).unwrap()],
        &NumericFormat::Binary,
    )
    .unwrap();
    acc.observe(rel_err(
        analytic::bnn_neuron_mse(&neuron, 0.5).unwrap().total,
        2.0,
        1e-30,
    ));
    acc.finish()
}

/// Discrete perturbation law drawn from an enumerated corrupted int word, a
/// representative bit-flip-induced noise shape.
fn reference_noise(p: f64) -> NoiseDistribution {
    let fmt = IntFormat::new(4).unwrap();
    let word = fmt.encode(3).unwrap();
    let dist = corrupted_distribution(&word, &NumericFormat::Int(fmt), p).unwrap();
    let clean = 3.0;
    let atoms = dist
        .atoms()
        .iter()
        .map(|&(v, pr)| (v.to_f64() - clean, pr))
        .collect();
    NoiseDistribution::new(atoms)
}

/// ReLU propagation: the split-form expression vs the direct definition
/// sum over atoms of (ReLU(y+xi) - ReLU(y))^2.
fn check_relu() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-relu-propagation", 1e-12);
    for p in [0.05, 0.2, 0.5] {
        let noise = reference_noise(p);
        for y in [-3.0, -0.5, 0.0, 0.4, 2.0, 9.0] {
            let closed = analytic::relu_propagated_mse(y, &noise);
            let direct: f64 = noise
                .atoms()
                .iter()
                .map(|&(xi, pr)| {
                    let da = (y + xi).max(0.0) - y.max(0.0);
                    pr * da * da
                })
                .sum();
            acc.observe(rel_err(closed, direct, 1e-30));
        }
    }
    acc.finish()
}

/// Step-limit sigmoid: the tau = 0 value must equal the exact expectation at
/// a temperature small enough that every atom saturates in f64.
fn check_sigmoid_step_limit() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-sigmoid-step-limit", 0.0);
    for p in [0.05, 0.3] {
        let noise = reference_noise(p);
        // Fractional offsets keep y + xi away from exactly zero, where the
        // finite-temperature sigmoid sits at 1/2 instead of a saturated rail.
        for y in [-2.3, 0.7, 2.2, 5.5] {
            let limit = analytic::sigmoid_propagated_mse(y, 0.0, &noise).unwrap();
            // Small enough that |y + xi| / tau > 40 for every atom.
            let tau = 1e-4;
            let saturated = analytic::sigmoid_propagated_mse(y, tau, &noise).unwrap();
            acc.observe(rel_err(limit, saturated, 1e-30));
        }
    }
    acc.finish()
}

fn check_sigmoid_high_temperature() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-sigmoid-high-tau", 0.05);
    for p in [0.1, 0.5] {
        let noise = reference_noise(p);
        let tau = 100.0 * noise.max_abs().max(1.0);
        let exact = analytic::sigmoid_propagated_mse(0.0, tau, &noise).unwrap();
        let linearized = noise.second_moment() / (16.0 * tau * tau);
        acc.observe(rel_err(exact, linearized, 1e-30));
    }
    acc.finish()
}

/// A single injected table flip changes the output for exactly one address,
/// and the uniform-input expected |dy| is flips / 2^K, exactly.
fn check_lut_isolation() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-lut-isolation", 0.0);
    let mut rng = seeded_rng(0x107);
    for k in 1..=6u8 {
        let len = 1usize << k;
        let entries = BitWord::new(rng.random::<u64>() & low_mask(len), len as u8).unwrap();
        let table = LutTable::new(k, entries).unwrap();
        for j in 0..len {
            let mut corrupted = table;
            corrupted.entries_mut().flip_bit(j as u8);
            let mut affected = 0usize;
            let mut total_abs_err = 0.0;
            for addr in 0..len {
                let dy = i32::from(corrupted.get(addr).unwrap()) - i32::from(table.get(addr).unwrap());
                if dy != 0 {
                    affected += 1;
                }
                total_abs_err += f64::from(dy.abs());
            }
            acc.observe(if affected == 1 { 0.0 } else { 1.0 });
            let mean_abs = total_abs_err / len as f64;
            let predicted = crate::netsim::address_error_rate(&table, 1).unwrap();
            acc.observe(if mean_abs == predicted { 0.0 } else { 1.0 });
        }
        // Multi-flip rates, including the saturated all-entries case.
        for flips in [0u32, 1, 1 << (k - 1), 1 << k] {
            let rate = crate::netsim::address_error_rate(&table, flips).unwrap();
            let expect = f64::from(flips) / len as f64;
            acc.observe(if rate == expect { 0.0 } else { 1.0 });
        }
    }
    acc.finish()
}

/// Full-corruption recovery probability equals the anti-symmetry mass,
/// exactly, for random tables and random address distributions.
fn check_recovery_alpha() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-recovery-alpha", 0.0);
    let mut rng = seeded_rng(0x901);
    for round in 0..200u32 {
        let k = 1 + (round % 6) as u8;
        let len = 1usize << k;
        let entries = BitWord::new(rng.random::<u64>() & low_mask(len), len as u8).unwrap();
        let table = LutTable::new(k, entries).unwrap();
        let dists = [
            recovery::AddressDistribution::uniform(k),
            recovery::AddressDistribution::random(k, rng.random::<u64>()),
        ];
        for dist in dists {
            let alpha = recovery::alpha(&table, &dist).unwrap();
            let recovered = recovery::recovery_probability_single(&table, &dist).unwrap();
            acc.observe(if alpha == recovered { 0.0 } else { 1.0 });
        }
    }
    acc.finish()
}

fn check_depth_recursion() -> OracleCheck {
    let mut acc = CheckAccumulator::new("theorem-depth-closed-form", 1e-12);
    for lambda in [0.5, 1.0, 1.5] {
        for nu in [0.1, 1.0] {
            let mut e_sq = 0.0;
            for depth in 0..=64u32 {
                let closed = analytic::depth_mse(lambda, nu, depth);
                acc.observe(rel_err(closed, e_sq, 1e-30));
                e_sq = lambda * lambda * e_sq + nu;
            }
        }
    }
    acc.finish()
}

/// The algebraic identity behind the protected-AQ reduction, exposed for
/// reuse by tests.
pub fn mse_from_parts(parts: &MseBreakdown) -> f64 {
    parts.total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_reduce_to_direct_sum() {
        // Direct probability-weighted sum vs the bucketed reduction.
        let fmt = IntFormat::new(3).unwrap();
        let word = fmt.encode(2).unwrap();
        let nf = NumericFormat::Int(fmt);
        let neuron =
            NeuronInstance::from_words(vec![1.5], vec![word], &nf).unwrap();
        let enumeration = NeuronEnumeration::new(&neuron, &nf);
        for p in [0.0, 0.2, 0.7, 1.0] {
            let mut direct = 0.0;
            for mask in 0..8u64 {
                let m = BitWord::new(mask, 3).unwrap();
                let corrupted = word.xor(&m).unwrap();
                let dy = 1.5 * (fmt.decode(&corrupted).unwrap() as f64 - 2.0);
                direct += mask_probability(p, m.popcount(), 3) * dy * dy;
            }
            assert!((enumeration.mse(p) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn default_checks_pass() {
        // Smaller budget keeps this unit test quick; the acceptance suite
        // runs the full budget.
        let report = run_checks(10);
        assert!(report.all_pass(), "\n{}", report.render());
    }

    #[test]
    fn injected_fault_is_surfaced() {
        let report = run_checks_with_fault(8, Some(InjectedFault::IntMseScale(1.0 + 1e-6)));
        assert!(!report.all_pass());
        let rendered = report.render();
        assert!(rendered.contains("theorem-int-mse"));
        assert!(rendered.contains("FAIL"), "\n{rendered}");
        // Only the perturbed identity fails.
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "theorem-int-mse");
    }
}

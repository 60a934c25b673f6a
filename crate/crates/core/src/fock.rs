//! Exact sparse simulation of the optical setup.
//!
//! A [`SparseFockState`] is a superposition of basis terms, each carrying the
//! party qubits as a bit pattern (party `k` at bit `k - 1`) and a photon
//! occupation vector of fixed length `2M + N`, ordered
//!
//! ```text
//! port1_P, port1_P⊥, port2_P, port2_P⊥, …, portM_P, portM_P⊥, loss1, …, lossN
//! ```
//!
//! Before the multiport the port slots hold the *input* modes: party `k`'s
//! pulse travels in the slot of its input port. After [`apply_multiport`] the
//! same slots hold the output modes. Linear-optical elements are applied by
//! rewriting creation operators, so the bosonic `√(n+1)` factors come out
//! exactly.
//!
//! This module is deliberately unclever. It shares no code with
//! [`crate::channel`] beyond the parameter struct.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::channel::ChannelStatistics;
use crate::error::{Error, Result};
use crate::params::SetupParams;

pub const MAX_PARTIES: usize = 6;
pub const MAX_PORTS: usize = 8;
const MAX_MODES: usize = 2 * MAX_PORTS + MAX_PARTIES;

/// Amplitudes below this magnitude are dropped after every stage.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Minimum post-selection probability for which a conditional state is formed.
pub const MIN_CONDITIONAL_PROB: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeKind {
    OutputP,
    OutputPerp,
    Loss,
}

/// A named optical mode; `index` is 1-based (port for outputs, channel for loss).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub kind: ModeKind,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeLayout {
    pub num_parties: usize,
    pub num_ports: usize,
    /// Input port (1-based) of each party.
    pub input_ports: Vec<usize>,
}

impl ModeLayout {
    pub fn num_modes(&self) -> usize {
        2 * self.num_ports + self.num_parties
    }

    pub fn slot(&self, mode: ModeIndex) -> usize {
        match mode.kind {
            ModeKind::OutputP => 2 * (mode.index - 1),
            ModeKind::OutputPerp => 2 * (mode.index - 1) + 1,
            ModeKind::Loss => 2 * self.num_ports + mode.index - 1,
        }
    }

    pub fn mode(&self, slot: usize) -> ModeIndex {
        if slot < 2 * self.num_ports {
            let kind = if slot.is_multiple_of(2) { ModeKind::OutputP } else { ModeKind::OutputPerp };
            ModeIndex { kind, index: slot / 2 + 1 }
        } else {
            ModeIndex { kind: ModeKind::Loss, index: slot - 2 * self.num_ports + 1 }
        }
    }

    fn port_p(&self, port: usize) -> usize {
        2 * (port - 1)
    }

    fn port_perp(&self, port: usize) -> usize {
        2 * (port - 1) + 1
    }

    fn loss(&self, party: usize) -> usize {
        2 * self.num_ports + party - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Occupation([u8; MAX_MODES]);

impl Occupation {
    fn empty() -> Self {
        Self([0; MAX_MODES])
    }
}

type Key = (u32, Occupation);

/// Joint state of the party qubits and all optical modes.
#[derive(Debug, Clone)]
pub struct SparseFockState {
    layout: ModeLayout,
    terms: HashMap<Key, Complex64>,
}

impl SparseFockState {
    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// Iterate `(qubit bits, occupations, amplitude)`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u8], Complex64)> + '_ {
        let len = self.layout.num_modes();
        self.terms.iter().map(move |((bits, occ), a)| (*bits, &occ.0[..len], *a))
    }

    /// One line per term, `bitstring | occupation-csv | re | im`, sorted.
    /// The bitstring lists party 1 first.
    pub fn dump(&self) -> String {
        let n = self.layout.num_parties;
        let len = self.layout.num_modes();
        let mut keys: Vec<&Key> = self.terms.keys().collect();
        keys.sort_by(|a, b| (a.0, &a.1 .0[..len]).cmp(&(b.0, &b.1 .0[..len])));
        let mut out = String::new();
        for key in keys {
            let amp = self.terms[key];
            let bits: String = (0..n).map(|k| if key.0 >> k & 1 == 1 { '1' } else { '0' }).collect();
            let occ: Vec<String> = key.1 .0[..len].iter().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "{} | {} | {:.16e} | {:.16e}", bits, occ.join(","), amp.re, amp.im);
        }
        out
    }

    fn with_terms(&self, terms: HashMap<Key, Complex64>) -> Self {
        let mut s = Self { layout: self.layout.clone(), terms };
        s.prune();
        s
    }

    fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }

    /// Rewrites the creation operator of every slot `s` with `map(s) = Some(v)`
    /// as `Σ v_i a_i†`, all slots simultaneously.
    fn apply_linear<F>(&self, map: F) -> Self
    where
        F: Fn(usize) -> Option<Vec<(usize, Complex64)>>,
    {
        let len = self.layout.num_modes();
        let maps: Vec<Option<Vec<(usize, Complex64)>>> = (0..len).map(&map).collect();
        let mut out: HashMap<Key, Complex64> = HashMap::new();
        for (&(bits, occ), &amp) in &self.terms {
            let mut residual = occ;
            let mut scale = amp;
            let mut pending: Vec<usize> = Vec::new();
            for s in 0..len {
                let k = occ.0[s];
                if k > 0 && maps[s].is_some() {
                    residual.0[s] = 0;
                    // |n⟩ = (a†)^n/√(n!) |0⟩
                    scale /= factorial(k as usize).sqrt();
                    pending.extend(std::iter::repeat_n(s, k as usize));
                }
            }
            let mut current: HashMap<Occupation, Complex64> = HashMap::from([(residual, scale)]);
            for s in pending {
                let targets = maps[s].as_ref().expect("mapped slot");
                let mut next: HashMap<Occupation, Complex64> = HashMap::with_capacity(current.len() * targets.len());
                for (o, a) in &current {
                    for &(tgt, c) in targets {
                        let mut o2 = *o;
                        let n_before = o2.0[tgt] as f64;
                        o2.0[tgt] += 1;
                        *next.entry(o2).or_default() += a * c * (n_before + 1.0).sqrt();
                    }
                }
                current = next;
            }
            for (o, a) in current {
                *out.entry((bits, o)).or_default() += a;
            }
        }
        self.with_terms(out)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn check_size(num_parties: usize, num_ports: usize) -> Result<()> {
    if num_parties < 2 || num_ports < num_parties {
        return Err(Error::InvalidParams(format!("need 2 <= N <= M, got N={num_parties}, M={num_ports}")));
    }
    if num_parties > MAX_PARTIES || num_ports > MAX_PORTS {
        return Err(Error::StateSpace(format!(
            "oracle limited to N <= {MAX_PARTIES}, M <= {MAX_PORTS} (got N={num_parties}, M={num_ports})"
        )));
    }
    Ok(())
}

/// Product of per-party states `√q |0⟩|vac⟩ + √(1-q) e^{iφ_k} |1⟩|1 photon⟩`
/// with `φ_1 = 0` and `φ_k = phi` otherwise; parties enter ports `1..=N`.
pub fn prepare_initial(num_parties: usize, num_ports: usize, q: f64, phi: f64) -> Result<SparseFockState> {
    let ports: Vec<usize> = (1..=num_parties).collect();
    prepare_initial_on_ports(num_ports, q, phi, &ports)
}

/// As [`prepare_initial`], with party `k` entering port `input_ports[k-1]`.
pub fn prepare_initial_on_ports(num_ports: usize, q: f64, phi: f64, input_ports: &[usize]) -> Result<SparseFockState> {
    let num_parties = input_ports.len();
    check_size(num_parties, num_ports)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParams(format!("q = {q} outside [0, 1]")));
    }
    let mut seen = vec![false; num_ports + 1];
    for &p in input_ports {
        if p == 0 || p > num_ports || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParams(format!("bad input port assignment {input_ports:?}")));
        }
    }
    let layout = ModeLayout { num_parties, num_ports, input_ports: input_ports.to_vec() };
    let vac = Complex64::new(q.sqrt(), 0.0);
    let mut terms: HashMap<Key, Complex64> = HashMap::new();
    for bits in 0u32..(1 << num_parties) {
        let mut occ = Occupation::empty();
        let mut amp = Complex64::new(1.0, 0.0);
        for k in 0..num_parties {
            if bits >> k & 1 == 1 {
                let phase = if k == 0 { 0.0 } else { phi };
                amp *= Complex64::from_polar((1.0 - q).sqrt(), phase);
                occ.0[layout.port_p(input_ports[k])] = 1;
            } else {
                amp *= vac;
            }
        }
        terms.insert((bits, occ), amp);
    }
    let mut s = SparseFockState { layout, terms };
    s.prune();
    Ok(s)
}

/// Each input pulse passes a beam splitter of transmittance `t` whose other
/// output is the party's loss mode.
pub fn apply_loss(state: &SparseFockState, t: f64) -> SparseFockState {
    let layout = state.layout.clone();
    let st = Complex64::new(t.sqrt(), 0.0);
    let sl = Complex64::new((1.0 - t).sqrt(), 0.0);
    state.apply_linear(|slot| {
        layout
            .input_ports
            .iter()
            .position(|&p| layout.port_p(p) == slot)
            .map(|party| vec![(slot, st), (layout.loss(party + 1), sl)])
    })
}

/// Rotates the polarization of parties `2..=N` by `theta` relative to party 1.
pub fn apply_polarization_misalignment(state: &SparseFockState, theta: f64) -> SparseFockState {
    let layout = state.layout.clone();
    let (c, s) = (Complex64::new(theta.cos(), 0.0), Complex64::new(-theta.sin(), 0.0));
    state.apply_linear(|slot| {
        layout.input_ports.iter().skip(1).find(|&&p| layout.port_p(p) == slot).map(|&p| {
            vec![(layout.port_p(p), c), (layout.port_perp(p), s)]
        })
    })
}

/// Multiport matrix element `U_{kj} = e^{2πi(k-1)(j-1)/M} / √M` (1-based).
pub fn multiport_element(num_ports: usize, k: usize, j: usize) -> Complex64 {
    let phase = 2.0 * PI * ((k - 1) * (j - 1) % num_ports) as f64 / num_ports as f64;
    Complex64::from_polar(1.0 / (num_ports as f64).sqrt(), phase)
}

/// Applies the `M`-port discrete-Fourier multiport to both polarizations.
pub fn apply_multiport(state: &SparseFockState) -> SparseFockState {
    let m = state.layout.num_ports;
    let layout = state.layout.clone();
    state.apply_linear(|slot| {
        if slot >= 2 * m {
            return None;
        }
        let port = slot / 2 + 1;
        let perp = slot % 2 == 1;
        Some(
            (1..=m)
                .map(|j| {
                    let tgt = if perp { layout.port_perp(j) } else { layout.port_p(j) };
                    (tgt, multiport_element(m, port, j))
                })
                .collect(),
        )
    })
}

/// Runs preparation, loss, misalignment and the multiport for `params`.
pub fn evolve(params: &SetupParams) -> Result<SparseFockState> {
    params.validate()?;
    check_size(params.num_parties, params.num_ports)?;
    let s = prepare_initial(params.num_parties, params.num_ports, params.vacuum_weight, params.phase_misalignment)?;
    let s = apply_loss(&s, params.transmittance);
    let s = apply_polarization_misalignment(&s, params.polarization_misalignment);
    Ok(apply_multiport(&s))
}

/// Dense density matrix of the party qubits, indexed by bit patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitDensityMatrix {
    num_qubits: usize,
    entries: Vec<Complex64>,
}

impl QubitDensityMatrix {
    pub fn zeros(num_qubits: usize) -> Self {
        let dim = 1 << num_qubits;
        Self { num_qubits, entries: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector of length `2^n`.
    pub fn from_pure(num_qubits: usize, amplitudes: &[Complex64]) -> Self {
        let dim = 1 << num_qubits;
        assert_eq!(amplitudes.len(), dim);
        let mut rho = Self::zeros(num_qubits);
        for r in 0..dim {
            for c in 0..dim {
                rho.entries[r * dim + c] = amplitudes[r] * amplitudes[c].conj();
            }
        }
        rho
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    fn add(&mut self, row: usize, col: usize, v: Complex64) {
        let d = self.dim();
        self.entries[row * d + col] += v;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    fn scale(&mut self, f: f64) {
        for e in &mut self.entries {
            *e *= f;
        }
    }

    /// Largest `|ρ_ij - conj(ρ_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized pure state.
    pub fn fidelity_with_pure(&self, psi: &[Complex64]) -> f64 {
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += psi[i].conj() * self.get(i, j) * psi[j];
            }
        }
        acc.re
    }
}

/// Projects onto the vacuum at every port whose index is not in `click`
/// and, for the clicked port, onto at least one photon. Traces out all
/// optical modes. Returns the projection probability and the normalized
/// qubit state.
fn post_select<F>(state: &SparseFockState, accept: F) -> Result<(f64, QubitDensityMatrix)>
where
    F: Fn(&[u8]) -> bool,
{
    let layout = &state.layout;
    let len = layout.num_modes();
    // group by optical configuration, then form Σ_o |a_o⟩⟨a_o|
    let mut groups: HashMap<Occupation, Vec<(u32, Complex64)>> = HashMap::new();
    for (&(bits, occ), &amp) in &state.terms {
        if accept(&occ.0[..len]) {
            groups.entry(occ).or_default().push((bits, amp));
        }
    }
    let mut rho = QubitDensityMatrix::zeros(layout.num_parties);
    for members in groups.values() {
        for &(b, a) in members {
            for &(b2, a2) in members {
                rho.add(b as usize, b2 as usize, a * a2.conj());
            }
        }
    }
    let prob = rho.trace().re;
    if !(prob >= MIN_CONDITIONAL_PROB) {
        return Err(Error::ZeroProbability(format!("post-selection probability {prob:e}")));
    }
    rho.scale(1.0 / prob);
    Ok((prob, rho))
}

fn port_count(occ: &[u8], port: usize) -> u32 {
    occ[2 * (port - 1)] as u32 + occ[2 * (port - 1) + 1] as u32
}

/// Conditional qubit state given that only detector `j` (1-based) clicked.
pub fn conditional_click_state(state: &SparseFockState, j: usize) -> Result<(f64, QubitDensityMatrix)> {
    let m = state.layout.num_ports;
    if j == 0 || j > m {
        return Err(Error::InvalidParams(format!("detector index {j} outside 1..={m}")));
    }
    post_select(state, |occ| (1..=m).all(|p| (port_count(occ, p) > 0) == (p == j)))
}

/// Conditional qubit state given that no photon reached any detector.
pub fn no_click_conditional_state(state: &SparseFockState) -> Result<(f64, QubitDensityMatrix)> {
    let m = state.layout.num_ports;
    post_select(state, |occ| (1..=m).all(|p| port_count(occ, p) == 0))
}

/// Probabilities of every detector pattern class: single click at each
/// port, no click, and two or more occupied ports.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickPartition {
    pub single: Vec<f64>,
    pub none: f64,
    pub multiple: f64,
}

pub fn click_partition(state: &SparseFockState) -> ClickPartition {
    let m = state.layout.num_ports;
    let mut part = ClickPartition { single: vec![0.0; m], none: 0.0, multiple: 0.0 };
    for (_, occ, a) in state.iter() {
        let lit: Vec<usize> = (1..=m).filter(|&p| port_count(occ, p) > 0).collect();
        let w = a.norm_sqr();
        match lit.as_slice() {
            [] => part.none += w,
            [p] => part.single[p - 1] += w,
            _ => part.multiple += w,
        }
    }
    part
}

/// Key-generation measurement angles given that detector `j` clicked:
/// `φ_k = arg U_{p_k j} - arg U_{p_1 j}` for input ports `p_k`.
pub fn kg_angles(input_ports: &[usize], num_ports: usize, j: usize) -> Vec<f64> {
    let base = multiport_element(num_ports, input_ports[0], j).arg();
    input_ports
        .iter()
        .map(|&p| (multiport_element(num_ports, p, j).arg() - base).rem_euclid(2.0 * PI))
        .collect()
}

/// Projector onto `(|0⟩ + λ e^{iφ}|1⟩)/√2` as a 2x2 matrix.
fn xy_projector(lambda: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let v = [Complex64::new(1.0, 0.0), Complex64::from_polar(lambda, phi)];
    let mut p = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            p[r][c] = v[r] * v[c].conj() * 0.5;
        }
    }
    p
}

/// Outcome statistics of the qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredStatistics {
    /// `qber_per_pair[i]` is the discord probability of parties 1 and `i + 2`.
    pub qber_per_pair: Vec<f64>,
    /// `Pr[∏ Z = +1]`.
    pub phase_error: f64,
}

impl MeasuredStatistics {
    pub fn max_qber(&self) -> f64 {
        self.qber_per_pair.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Party `k` measures in the eigenbasis of `cos φ_k X + sin φ_k Y`
/// (`angles[k-1]`); the phase error is read off the diagonal.
pub fn measure_statistics(rho: &QubitDensityMatrix, angles: &[f64]) -> MeasuredStatistics {
    let n = rho.num_qubits();
    assert_eq!(angles.len(), n, "one angle per party");
    let d = rho.dim();
    let mut qber_per_pair = Vec::with_capacity(n - 1);
    let projectors = |k: usize| [xy_projector(1.0, angles[k]), xy_projector(-1.0, angles[k])];
    let first = projectors(0);
    for k in 1..n {
        let other = projectors(k);
        let rest_mask = !((1u32 << 0) | (1u32 << k)) & ((1u32 << n) - 1);
        let mut discord = 0.0;
        // outcomes differ: (+,-) and (-,+)
        for (a, b) in [(0, 1), (1, 0)] {
            let (pa, pb) = (&first[a], &other[b]);
            let mut acc = Complex64::new(0.0, 0.0);
            for row in 0..d {
                for col in 0..d {
                    if (row as u32 ^ col as u32) & rest_mask != 0 {
                        continue;
                    }
                    // Tr[(P ⊗ Q) ρ] = Σ ⟨col|P⊗Q|row⟩... written as Σ_{r,c} O[c][r] ρ[r][c]
                    let (r1, c1) = (row & 1, col & 1);
                    let (rk, ck) = (row >> k & 1, col >> k & 1);
                    acc += pa[c1][r1] * pb[ck][rk] * rho.get(row, col);
                }
            }
            discord += acc.re;
        }
        qber_per_pair.push(discord);
    }
    let phase_error = (0..d).filter(|i| i.count_ones() % 2 == 0).map(|i| rho.get(i, i).re).sum();
    MeasuredStatistics { qber_per_pair, phase_error }
}

/// Photon-only statistics from the full simulation, detector 1, with the
/// QBER reported as the maximum over pairs.
pub fn oracle_statistics(params: &SetupParams) -> Result<ChannelStatistics> {
    oracle_statistics_at(params, 1)
}

/// As [`oracle_statistics`] for detector `j`.
pub fn oracle_statistics_at(params: &SetupParams, j: usize) -> Result<ChannelStatistics> {
    let state = evolve(params)?;
    let (p_j, rho) = conditional_click_state(&state, j)?;
    let angles = kg_angles(&state.layout.input_ports, params.num_ports, j);
    let stats = measure_statistics(&rho, &angles);
    Ok(ChannelStatistics { click_prob: p_j, qber: stats.max_qber(), phase_error: stats.phase_error })
}

/// Dark-count adjusted statistics built from oracle components: the single
/// click and no-photon branches are each simulated, then mixed with
/// per-detector dark-count probability `p_d`.
pub fn oracle_dark_count_statistics(params: &SetupParams) -> Result<ChannelStatistics> {
    let state = evolve(params)?;
    let m = params.num_ports;
    let p_d = params.dark_count_prob;
    let quiet = (1.0 - p_d).powi(m as i32 - 1);
    let angles = kg_angles(&state.layout.input_ports, m, 1);
    let photon = conditional_click_state(&state, 1).ok();
    let dark = no_click_conditional_state(&state).ok();
    let (p_ph, q_ph, z_ph) = match &photon {
        Some((p, rho)) => {
            let s = measure_statistics(rho, &angles);
            (*p, s.max_qber(), s.phase_error)
        }
        None => (0.0, 0.0, 0.0),
    };
    let (p_0, q_0, z_0) = match &dark {
        Some((p, rho)) => {
            let s = measure_statistics(rho, &angles);
            (*p, s.max_qber(), s.phase_error)
        }
        None => (0.0, 0.0, 0.0),
    };
    let w_ph = p_ph * quiet;
    let w_0 = p_d * p_0 * quiet;
    let total = w_ph + w_0;
    if !(total > 0.0) {
        return Err(Error::ZeroProbability("no single-click events".into()));
    }
    Ok(ChannelStatistics {
        click_prob: total,
        qber: (w_ph * q_ph + w_0 * q_0) / total,
        phase_error: (w_ph * z_ph + w_0 * z_0) / total,
    })
}

/// The `N`-qubit W state `Σ_k c_k |e_k⟩` with `c_k = U_{kj}/|U_{kj}|·N^{-1/2}`;
/// `j = 1` is the standard W state.
pub fn w_state(num_parties: usize, num_ports: usize, j: usize) -> Vec<Complex64> {
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_parties];
    let norm = 1.0 / (num_parties as f64).sqrt();
    for k in 1..=num_parties {
        let phase = multiport_element(num_ports, k, j).arg();
        amps[1 << (k - 1)] = Complex64::from_polar(norm, phase);
    }
    amps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn prepare_vacuum_and_full() {
        let s = prepare_initial(3, 3, 1.0, 0.4).unwrap();
        assert_eq!(s.num_terms(), 1);
        let (bits, occ, a) = s.iter().next().unwrap();
        assert_eq!(bits, 0);
        assert!(occ.iter().all(|&n| n == 0));
        assert_eq!(a, Complex64::new(1.0, 0.0));

        let s = prepare_initial(3, 3, 0.0, 0.0).unwrap();
        assert_eq!(s.num_terms(), 1);
        let (bits, occ, _) = s.iter().next().unwrap();
        assert_eq!(bits, 0b111);
        assert_eq!(&occ[..6], &[1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn prepare_balanced_pair() {
        let s = prepare_initial(2, 2, 0.5, 0.0).unwrap();
        assert_eq!(s.num_terms(), 4);
        for (_, _, a) in s.iter() {
            assert!((a - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn loss_extremes() {
        let s = prepare_initial(3, 4, 0.3, 0.2).unwrap();
        let kept = apply_loss(&s, 1.0);
        assert!(kept.iter().all(|(_, occ, _)| occ[8..].iter().all(|&n| n == 0)));
        let lost = apply_loss(&s, 0.0);
        assert!(lost.iter().all(|(_, occ, _)| occ[..8].iter().all(|&n| n == 0)));
        assert!(close(apply_loss(&s, 0.37).norm_sqr(), 1.0, 1e-12));
    }

    #[test]
    fn rotation_extremes() {
        let s = apply_loss(&prepare_initial(3, 3, 0.4, 0.0).unwrap(), 0.8);
        let same = apply_polarization_misalignment(&s, 0.0);
        assert!(same.iter().all(|(_, occ, _)| occ[1] == 0 && occ[3] == 0 && occ[5] == 0));
        let flipped = apply_polarization_misalignment(&s, std::f64::consts::FRAC_PI_2);
        // parties 2 and 3 end up fully in P⊥; party 1 stays in P
        assert!(flipped.iter().all(|(_, occ, _)| occ[2] == 0 && occ[4] == 0 && occ[1] == 0));
        assert!(close(apply_polarization_misalignment(&s, 0.77).norm_sqr(), 1.0, 1e-12));
    }

    #[test]
    fn two_port_multiport_is_balanced_splitter() {
        let r = 1.0 / 2f64.sqrt();
        assert!((multiport_element(2, 1, 1) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((multiport_element(2, 1, 2) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((multiport_element(2, 2, 1) - Complex64::new(r, 0.0)).norm() < 1e-15);
        assert!((multiport_element(2, 2, 2) - Complex64::new(-r, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_photon_spreads_evenly() {
        // bit pattern 01: only party 1 emitted, amplitude √q√(1-q) = 1/2
        let s = apply_multiport(&prepare_initial(2, 5, 0.5, 0.0).unwrap());
        let mut hits = 0;
        for (bits, _, a) in s.iter() {
            if bits == 0b01 {
                hits += 1;
                assert!(close(a.norm(), 0.5 / 5f64.sqrt(), 1e-14));
            }
        }
        assert_eq!(hits, 5);
    }

    #[test]
    fn multiport_preserves_norm_and_photons() {
        let s = apply_polarization_misalignment(&apply_loss(&prepare_initial(3, 4, 0.3, 0.5).unwrap(), 0.6), 0.3);
        let mut before: HashMap<u32, Vec<usize>> = HashMap::new();
        for (b, occ, _) in s.iter() {
            before.entry(b).or_default().push(occ.iter().map(|&n| n as usize).sum());
        }
        let out = apply_multiport(&s);
        assert!(close(out.norm_sqr(), 1.0, 1e-12));
        for (b, occ, _) in out.iter() {
            let total: usize = occ.iter().map(|&n| n as usize).sum();
            assert!(before[&b].contains(&total));
            // photons never exceed emitted qubits
            assert!(total <= b.count_ones() as usize);
        }
    }

    #[test]
    fn dump_format() {
        let s = prepare_initial(2, 2, 0.5, 0.0).unwrap();
        let text = s.dump();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("00 | 0,0,0,0,0,0 | 5.00000000000000"), "{}", lines[0]);
        assert!(lines[0].ends_with(" | 0.0000000000000000e0"));
        assert!(lines[3].starts_with("11 | 1,0,1,0,0,0 | "));
    }

    #[test]
    fn size_guard() {
        let p = SetupParams::ideal(7, 8, 0.9, 0.5);
        assert!(matches!(oracle_statistics(&p), Err(Error::StateSpace(_))));
        let p = SetupParams::ideal(3, 9, 0.9, 0.5);
        assert!(matches!(oracle_statistics(&p), Err(Error::StateSpace(_))));
    }

    #[test]
    fn no_emission_has_no_click() {
        let s = evolve(&SetupParams::ideal(3, 3, 1.0, 0.5)).unwrap();
        assert!(matches!(conditional_click_state(&s, 1), Err(Error::ZeroProbability(_))));
        let (p, rho) = no_click_conditional_state(&s).unwrap();
        assert!(close(p, 1.0, 1e-15));
        assert!(close(rho.get(0, 0).re, 1.0, 1e-15));
    }

    #[test]
    fn vacuum_qubits_statistics() {
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        amps[0] = Complex64::new(1.0, 0.0);
        let rho = QubitDensityMatrix::from_pure(3, &amps);
        let s = measure_statistics(&rho, &[0.0, 1.0, 2.0]);
        for q in &s.qber_per_pair {
            assert!(close(*q, 0.5, 1e-15));
        }
        assert!(close(s.phase_error, 1.0, 1e-15));
    }

    #[test]
    fn kg_angles_follow_multiport_phases() {
        let a = kg_angles(&[1, 2, 3], 4, 3);
        assert!(close(a[0], 0.0, 1e-15));
        assert!(close(a[1], PI, 1e-12));
        assert!(close(a[2], 0.0, 1e-12) || close(a[2], 2.0 * PI, 1e-12));
    }
}

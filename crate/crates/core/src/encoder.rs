//! Synthesis of the encoding operators from chains of rotation blocks.
//!
//! For a real unit target `v`, the preparation operator `U_a` satisfies
//! `U_a |00> = v` (its first column is `v`), and the unpreparation operator
//! `U_b` satisfies `U_b v = |11>` (its last row is `v`).
//!
//! Both are built from a chain `P = M_{p2}(t2) · M_{p1}(t1) · M_{p0}(t0)` of
//! blocks, one per slot, where `p` is a [`BlockOrdering`] listed in
//! application order. With `pre_flip` the chain starts from `|11>`:
//!
//! ```text
//! prepare   = P · F            F = X⊗X if pre_flip, else I
//! unprepare = (X⊗X) · (P · F)^T
//! ```
//!
//! so with `pre_flip` the unpreparation operator is simply `P^T`, which in
//! product form reads `M_{p0}^T · M_{p1}^T · M_{p2}^T`.
//!
//! Angles are found by walking the chain one block at a time. Each block fixes
//! one target component through an arcsin/arccos relation whose quotient
//! divides by the amplitude still sitting on `|11>`. Every branch of those
//! relations (both arcsin branches, both arccos signs, and the quotient with
//! either sign) is enumerated, and the branch whose reconstruction is closest
//! to the target wins. The winner is then checked against the operator
//! contract with explicit matrix products.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::blocks::{block_matrix, block_gate_sequence, AngleTriple, BlockError, BlockSlot};
use crate::statevec::{pauli_x, GateOp, Unitary4, ALGEBRAIC_TOL};

/// Tolerance of the preparation and unpreparation contracts.
pub const CONTRACT_TOL: f64 = 1e-10;
/// Quotient denominators below this are degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-8;
/// Remaining target mass below this counts as exactly zero; the
/// corresponding angles are set to 0.
const ZERO_TAIL: f64 = 1e-12;
/// Branches whose fixed component misses the target by more than this are pruned.
const BRANCH_PRUNE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncoderError {
    #[error("target vector has non-finite components")]
    NonFinite,
    #[error("target vector norm {0} is not 1")]
    NotUnit(f64),
    #[error("degenerate denominator {denominator:e} while solving the {slot} angle")]
    Degenerate { slot: BlockSlot, denominator: f64 },
    #[error("block ordering is not usable: {0}")]
    InvalidOrdering(&'static str),
    #[error("synthesis failed: residual {residual:e} exceeds {CONTRACT_TOL:e}")]
    SynthesisFailure { residual: f64 },
    #[error(transparent)]
    Block(#[from] BlockError),
}

/// Real unit 4-vector to be encoded as two-qubit amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVec([f64; 4]);

impl TargetVec {
    pub fn new(components: [f64; 4]) -> Result<Self, EncoderError> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EncoderError::NonFinite);
        }
        let norm = components.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > CONTRACT_TOL {
            return Err(EncoderError::NotUnit(norm));
        }
        Ok(Self(components))
    }

    /// Scales a non-zero finite vector to unit length.
    pub fn normalized(raw: [f64; 4]) -> Result<Self, EncoderError> {
        if raw.iter().any(|c| !c.is_finite()) {
            return Err(EncoderError::NonFinite);
        }
        // Rescale first so that squaring neither overflows nor underflows.
        let scale = raw.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if scale == 0.0 {
            return Err(EncoderError::NotUnit(0.0));
        }
        let scaled = raw.map(|c| c / scale);
        let norm = scaled.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self::new(scaled.map(|c| c / norm))
    }

    pub fn components(&self) -> &[f64; 4] {
        &self.0
    }
}

/// Order in which the three blocks are applied, and whether the chain
/// starts from `|11>` instead of `|00>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockOrdering {
    /// Slots in application order.
    pub permutation: [BlockSlot; 3],
    pub pre_flip: bool,
}

impl BlockOrdering {
    pub fn new(permutation: [BlockSlot; 3], pre_flip: bool) -> Result<Self, EncoderError> {
        let mut seen = [false; 3];
        for s in permutation {
            if std::mem::replace(&mut seen[s.index()], true) {
                return Err(EncoderError::InvalidOrdering("permutation repeats a slot"));
            }
        }
        if !pre_flip && permutation[0].index() != 0 {
            // From |00> only the slot-0 block moves any amplitude onto |11>.
            return Err(EncoderError::InvalidOrdering("a chain starting at |00> must apply the slot-0 block first"));
        }
        Ok(Self { permutation, pre_flip })
    }

    /// `U_a = M2 · M1 · M0` from `|00>`.
    pub fn canonical_prepare() -> Self {
        Self { permutation: BlockSlot::ALL, pre_flip: false }
    }

    /// `M0 · M1 · M2` from `|11>`: the slot-2 block acts first.
    pub fn canonical_unprepare() -> Self {
        let [s0, s1, s2] = BlockSlot::ALL;
        Self { permutation: [s2, s1, s0], pre_flip: true }
    }

    fn start(&self) -> [f64; 4] {
        if self.pre_flip {
            [0.0, 0.0, 0.0, 1.0]
        } else {
            [1.0, 0.0, 0.0, 0.0]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// Operator mapping `|00>` to the target.
    Prepare,
    /// Operator mapping the target to `|11>`.
    Unprepare,
}

fn x_on_both() -> Unitary4 {
    Unitary4::kron(&pauli_x(), &pauli_x())
}

/// `P · F` for the given ordering and angles.
pub fn chain_operator(ordering: &BlockOrdering, angles: &AngleTriple) -> Unitary4 {
    let mut u = if ordering.pre_flip { x_on_both() } else { Unitary4::identity() };
    for slot in ordering.permutation {
        u = block_matrix(slot, angles.get(slot)) * u;
    }
    u
}

pub fn assemble(ordering: &BlockOrdering, angles: &AngleTriple, mode: SynthesisMode) -> Unitary4 {
    let chain = chain_operator(ordering, angles);
    match mode {
        SynthesisMode::Prepare => chain,
        SynthesisMode::Unprepare => x_on_both() * chain.adjoint(),
    }
}

/// Max-abs violation of the mode's contract: `U|00> - v` for preparation,
/// `U v - |11>` for unpreparation.
pub fn contract_residual(target: &TargetVec, op: &Unitary4, mode: SynthesisMode) -> f64 {
    let v = target.components();
    let diff: [f64; 4] = match mode {
        SynthesisMode::Prepare => {
            let col = op.column(0);
            let mut d = [0.0; 4];
            for k in 0..4 {
                d[k] = (col[k] - Complex64::new(v[k], 0.0)).norm();
            }
            d
        }
        SynthesisMode::Unprepare => {
            let out = op.apply_to(&v.map(|x| Complex64::new(x, 0.0)));
            let e3 = [0.0, 0.0, 0.0, 1.0];
            let mut d = [0.0; 4];
            for k in 0..4 {
                d[k] = (out[k] - Complex64::new(e3[k], 0.0)).norm();
            }
            d
        }
    };
    diff.iter().fold(0.0f64, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(*d) })
}

/// Gates realising [`assemble`] in application order.
pub fn circuit(ordering: &BlockOrdering, angles: &AngleTriple, mode: SynthesisMode) -> Result<Vec<GateOp>, EncoderError> {
    let flip = [GateOp::x(0), GateOp::x(1)];
    let mut gates = Vec::new();
    match mode {
        SynthesisMode::Prepare => {
            if ordering.pre_flip {
                gates.extend(flip.iter().cloned());
            }
            for slot in ordering.permutation {
                gates.extend(block_gate_sequence(slot, angles.get(slot))?);
            }
        }
        SynthesisMode::Unprepare => {
            // Block transposes are the same blocks at negated angles.
            for slot in ordering.permutation.iter().rev() {
                gates.extend(block_gate_sequence(*slot, -angles.get(*slot))?);
            }
            if !ordering.pre_flip {
                gates.extend(flip.iter().cloned());
            }
        }
    }
    Ok(gates)
}

/// How strictly the chain walk treats small denominators.
#[derive(Clone, Copy, PartialEq)]
enum Denominators {
    /// Small denominators with non-zero remaining mass are an error.
    Strict,
    /// Small denominators are clamped and left to the residual selector.
    Lenient,
}

/// Candidate half-angles for a block whose slot amplitude starts at zero:
/// `-sin(h) * w3 = v_x`, i.e. `sin(h) = q` with `q = -v_x / w3`.
///
/// The relation is enumerated as written (both arcsin branches), as its
/// arccos counterpart, and with `q` negated.
fn rotation_candidates(q: f64) -> [f64; 8] {
    let q = q.clamp(-1.0, 1.0);
    let s = q.asin();
    let sn = (-q).asin();
    let c = q.acos();
    let cn = (-q).acos();
    [s, PI - s, sn, PI - sn, c, -c, cn, -cn]
}

/// Candidate half-angles for the first block of a chain starting at `|00>`:
/// `cos(h) = v_0`.
fn opening_candidates(v0: f64) -> [f64; 8] {
    let q = v0.clamp(-1.0, 1.0);
    let c = q.acos();
    let cn = (-q).acos();
    let s = q.asin();
    let sn = (-q).asin();
    [c, -c, cn, -cn, s, PI - s, sn, PI - sn]
}

struct Walk<'a> {
    target: &'a [f64; 4],
    ordering: &'a BlockOrdering,
    denominators: Denominators,
    best: Option<(f64, [f64; 3])>,
    degenerate: Option<EncoderError>,
}

impl Walk<'_> {
    /// Depth-first over branch choices. `w` is the partial state after
    /// `step` blocks, `half` the half-angles chosen so far.
    fn visit(&mut self, step: usize, w: [f64; 4], half: [f64; 3]) {
        let v = self.target;
        if step == 3 {
            let residual = w.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if self.best.is_none_or(|(r, _)| residual < r) {
                self.best = Some((residual, half));
            }
            return;
        }
        let slot = self.ordering.permutation[step];
        let x = slot.index();
        let opening = step == 0 && !self.ordering.pre_flip;
        let candidates = if opening {
            opening_candidates(v[0])
        } else {
            let denominator = w[3];
            // Target mass not yet placed: this slot, the later slots and |11>.
            let tail = self.ordering.permutation[step..]
                .iter()
                .map(|s| v[s.index()] * v[s.index()])
                .sum::<f64>()
                + v[3] * v[3];
            let q = if denominator.abs() < DEGENERATE_DENOMINATOR {
                if tail.sqrt() <= ZERO_TAIL {
                    0.0
                } else if self.denominators == Denominators::Strict {
                    self.degenerate.get_or_insert(EncoderError::Degenerate { slot, denominator });
                    return;
                } else if denominator == 0.0 {
                    0.0
                } else {
                    -v[x] / denominator
                }
            } else {
                -v[x] / denominator
            };
            if q.abs() <= ZERO_TAIL && tail.sqrt() <= ZERO_TAIL {
                // Nothing left to place: only the zero angle is meaningful.
                [0.0; 8]
            } else {
                rotation_candidates(q)
            }
        };
        let mut tried: Vec<f64> = Vec::with_capacity(8);
        for h in candidates {
            if tried.contains(&h) {
                continue;
            }
            tried.push(h);
            let (sin, cos) = h.sin_cos();
            let mut next = w;
            next[x] = cos * w[x] - sin * w[3];
            next[3] = sin * w[x] + cos * w[3];
            if (next[x] - v[x]).abs() > BRANCH_PRUNE {
                continue;
            }
            let mut half = half;
            half[step] = h;
            self.visit(step + 1, next, half);
        }
    }
}

fn to_angles(ordering: &BlockOrdering, half: [f64; 3]) -> AngleTriple {
    let mut angles = AngleTriple::ZERO;
    for (slot, h) in ordering.permutation.iter().zip(half) {
        angles.set(*slot, 2.0 * h);
    }
    angles
}

fn walk(target: &TargetVec, ordering: &BlockOrdering, denominators: Denominators) -> Result<(AngleTriple, f64), EncoderError> {
    let mut walk = Walk { target: target.components(), ordering, denominators, best: None, degenerate: None };
    walk.visit(0, ordering.start(), [0.0; 3]);
    match (walk.best, walk.degenerate) {
        (_, Some(err)) => Err(err),
        (Some((residual, half)), None) => Ok((to_angles(ordering, half), residual)),
        (None, None) => Err(EncoderError::SynthesisFailure { residual: f64::INFINITY }),
    }
}

fn chain_state(ordering: &BlockOrdering, angles: &AngleTriple) -> [f64; 4] {
    let mut w = ordering.start();
    for slot in ordering.permutation {
        let x = slot.index();
        let (sin, cos) = (angles.get(slot) / 2.0).sin_cos();
        let (wx, w3) = (w[x], w[3]);
        w[x] = cos * wx - sin * w3;
        w[3] = sin * wx + cos * w3;
    }
    w
}

/// Damped Gauss-Newton on the chain reconstruction, bounded to 50 steps.
pub(crate) fn refine(target: &TargetVec, ordering: &BlockOrdering, initial: AngleTriple) -> (AngleTriple, f64) {
    let v = target.components();
    let residual_vec = |a: &AngleTriple| {
        let w = chain_state(ordering, a);
        [w[0] - v[0], w[1] - v[1], w[2] - v[2], w[3] - v[3]]
    };
    let max_abs = |r: &[f64; 4]| r.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let slots = ordering.permutation;
    let mut angles = initial;
    let mut r = residual_vec(&angles);
    let mut lambda = 1e-6;
    for _ in 0..50 {
        if max_abs(&r) < 1e-14 {
            break;
        }
        let mut jac = [[0.0; 3]; 4];
        let step = 1e-7;
        for (j, slot) in slots.iter().enumerate() {
            let mut plus = angles;
            plus.set(*slot, angles.get(*slot) + step);
            let mut minus = angles;
            minus.set(*slot, angles.get(*slot) - step);
            let (rp, rm) = (residual_vec(&plus), residual_vec(&minus));
            for i in 0..4 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * step);
            }
        }
        // (J^T J + lambda I) delta = -J^T r
        let mut a = [[0.0; 3]; 3];
        let mut g = [0.0; 3];
        for p in 0..3 {
            for q in 0..3 {
                a[p][q] = (0..4).map(|i| jac[i][p] * jac[i][q]).sum();
            }
            a[p][p] += lambda;
            g[p] = -(0..4).map(|i| jac[i][p] * r[i]).sum::<f64>();
        }
        let Some(delta) = solve3(a, g) else { break };
        let mut trial = angles;
        for (j, slot) in slots.iter().enumerate() {
            trial.set(*slot, angles.get(*slot) + delta[j]);
        }
        let rt = residual_vec(&trial);
        if max_abs(&rt) < max_abs(&r) {
            angles = trial;
            r = rt;
            lambda = (lambda * 0.1).max(1e-15);
        } else {
            lambda *= 10.0;
        }
    }
    (angles, max_abs(&r))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Angles for `U_a = M2 · M1 · M0` acting on `|00>`:
/// `a = 2 arccos(a0)`, `b = 2 arcsin(-a1 / sin(a/2))`, and `c` from the
/// third component over `sin(a/2) cos(b/2)`, with branches chosen by the
/// reconstruction.
pub fn canonical_angles_ua(target: &TargetVec) -> Result<AngleTriple, EncoderError> {
    let ordering = BlockOrdering::canonical_prepare();
    let (angles, residual) = walk(target, &ordering, Denominators::Strict)?;
    if residual > CONTRACT_TOL {
        return Err(EncoderError::SynthesisFailure { residual });
    }
    Ok(angles)
}

/// Angles for the chain `M0 · M1 · M2` from `|11>` (slot 2 first), whose
/// transpose is `U_b`: `c = 2 arcsin(b2)`, `b = 2 arcsin(b1 / cos(c/2))`,
/// `a = 2 arcsin(b0 / (cos(b/2) cos(c/2)))`, up to branch and sign.
pub fn canonical_angles_ub(target: &TargetVec) -> Result<AngleTriple, EncoderError> {
    let ordering = BlockOrdering::canonical_unprepare();
    let (angles, residual) = walk(target, &ordering, Denominators::Strict)?;
    if residual > CONTRACT_TOL {
        return Err(EncoderError::SynthesisFailure { residual });
    }
    Ok(angles)
}

/// Ordering under which no quotient denominator can be small.
///
/// With `|v_i| <= |v_j| <= |v_k|` over the three slots, the chain applies
/// `M_i`, then `M_j`, then `M_k`, starting from `|11>`; the denominators are
/// then bounded below by `1/sqrt(3)`. Ties go to the lower slot. A target that
/// is already `±|00>` gets the canonical preparation ordering, for which all
/// angles but the first vanish.
pub fn select_ordering(target: &TargetVec) -> BlockOrdering {
    let v = target.components();
    if v[1..].iter().all(|c| c.abs() <= ZERO_TAIL) {
        return BlockOrdering::canonical_prepare();
    }
    let mut slots = BlockSlot::ALL;
    slots.sort_by(|a, b| v[a.index()].abs().total_cmp(&v[b.index()].abs()).then(a.cmp(b)));
    BlockOrdering { permutation: slots, pre_flip: true }
}

/// Angles for any ordering, selected by branch enumeration with a bounded
/// numerical refinement as the last resort.
pub fn solve_angles_general(
    target: &TargetVec,
    ordering: &BlockOrdering,
    mode: SynthesisMode,
) -> Result<AngleTriple, EncoderError> {
    let (mut angles, chain_residual) = walk(target, ordering, Denominators::Lenient)?;
    let mut residual = contract_residual(target, &assemble(ordering, &angles, mode), mode);
    if residual > CONTRACT_TOL || chain_residual > CONTRACT_TOL {
        let (refined, _) = refine(target, ordering, angles);
        angles = refined;
        residual = contract_residual(target, &assemble(ordering, &angles, mode), mode);
    }
    if !angles.is_finite() || !(residual <= CONTRACT_TOL) {
        return Err(EncoderError::SynthesisFailure { residual });
    }
    Ok(angles)
}

/// A verified encoding operator together with how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub ordering: BlockOrdering,
    pub angles: AngleTriple,
    pub mode: SynthesisMode,
    pub operator: Unitary4,
    pub residual: f64,
}

pub fn synthesize(target: &TargetVec, mode: SynthesisMode) -> Result<Synthesis, EncoderError> {
    let ordering = select_ordering(target);
    let angles = solve_angles_general(target, &ordering, mode)?;
    let operator = assemble(&ordering, &angles, mode);
    let residual = contract_residual(target, &operator, mode);
    if !(residual <= CONTRACT_TOL) || operator.unitarity_deviation() > ALGEBRAIC_TOL {
        return Err(EncoderError::SynthesisFailure { residual });
    }
    Ok(Synthesis { ordering, angles, mode, operator, residual })
}

/// Unitary whose first column is `target`.
pub fn build_ua(target: &TargetVec) -> Result<Unitary4, EncoderError> {
    synthesize(target, SynthesisMode::Prepare).map(|s| s.operator)
}

/// Unitary whose last row is `target`, so that it maps `target` to `|11>`.
pub fn build_ub(target: &TargetVec) -> Result<Unitary4, EncoderError> {
    synthesize(target, SynthesisMode::Unprepare).map(|s| s.operator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::StateVector;
    use proptest::prelude::*;

    fn tv(v: [f64; 4]) -> TargetVec {
        TargetVec::new(v).unwrap()
    }

    /// Independent reconstruction: explicit block matrices applied to the start state.
    fn reconstruct(ordering: &BlockOrdering, angles: &AngleTriple) -> [f64; 4] {
        let mut state = StateVector::zero_state(2).unwrap();
        if ordering.pre_flip {
            state = state.apply_gate(&GateOp::x(0)).unwrap().apply_gate(&GateOp::x(1)).unwrap();
        }
        for slot in ordering.permutation {
            state = state.apply_unitary(&block_matrix(slot, angles.get(slot)), (0, 1)).unwrap();
        }
        let a = state.amplitudes();
        [a[0].re, a[1].re, a[2].re, a[3].re]
    }

    fn max_diff(a: &[f64; 4], b: &[f64; 4]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn target_validation() {
        assert!(matches!(TargetVec::new([1.0, 1.0, 0.0, 0.0]), Err(EncoderError::NotUnit(_))));
        assert!(matches!(TargetVec::new([f64::NAN, 0.0, 0.0, 0.0]), Err(EncoderError::NonFinite)));
        assert!(matches!(TargetVec::normalized([0.0; 4]), Err(EncoderError::NotUnit(_))));
        assert!(TargetVec::normalized([3.0, 0.0, 4.0, 0.0]).is_ok());
    }

    #[test]
    fn ordering_validation() {
        let [s0, s1, s2] = BlockSlot::ALL;
        assert!(BlockOrdering::new([s0, s0, s1], true).is_err());
        assert!(BlockOrdering::new([s1, s0, s2], false).is_err());
        assert!(BlockOrdering::new([s1, s0, s2], true).is_ok());
    }

    #[test]
    fn canonical_ua_examples() {
        let angles = canonical_angles_ua(&tv([1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(angles, AngleTriple::ZERO);
        let u = assemble(&BlockOrdering::canonical_prepare(), &angles, SynthesisMode::Prepare);
        assert_eq!(u, Unitary4::identity());

        let angles = canonical_angles_ua(&tv([0.0, 0.0, 0.0, 1.0])).unwrap();
        assert!((angles.a - PI).abs() < 1e-15);
        assert_eq!((angles.b, angles.c), (0.0, 0.0));
        let v = reconstruct(&BlockOrdering::canonical_prepare(), &angles);
        assert!(max_diff(&v, &[0.0, 0.0, 0.0, 1.0]) < 1e-15);
    }

    #[test]
    fn canonical_ua_handles_non_negative_third_component() {
        // Principal branches of the printed relations force the third component
        // non-positive; branch enumeration must recover a positive one.
        let target = tv(qkernel_oracle::feature_map(0.54, 0.54).unwrap());
        let angles = canonical_angles_ua(&target).unwrap();
        let v = reconstruct(&BlockOrdering::canonical_prepare(), &angles);
        assert!(max_diff(&v, target.components()) < CONTRACT_TOL);
    }

    #[test]
    fn canonical_ua_degenerate_denominator() {
        // sin(a/2) ~ 1.4e-9 while the remaining components are not zero.
        let t: f64 = 1e-9;
        let target = tv([(1.0 - 2.0 * t * t).sqrt(), t, 0.0, t]);
        assert!(matches!(canonical_angles_ua(&target), Err(EncoderError::Degenerate { .. })));
        // The reordered path has no such problem.
        let ordering = select_ordering(&target);
        let angles = solve_angles_general(&target, &ordering, SynthesisMode::Prepare).unwrap();
        assert!(max_diff(&reconstruct(&ordering, &angles), target.components()) < CONTRACT_TOL);
    }

    #[test]
    fn canonical_ub_examples() {
        let angles = canonical_angles_ub(&tv([0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(angles, AngleTriple::ZERO);
        let w = assemble(&BlockOrdering::canonical_unprepare(), &angles, SynthesisMode::Unprepare);
        assert_eq!(w, Unitary4::identity());

        let target = tv([0.0, 0.0, 1.0, 0.0]);
        let angles = canonical_angles_ub(&target).unwrap();
        assert!(((angles.c / 2.0).sin().abs() - 1.0).abs() < 1e-15);
        assert_eq!((angles.a, angles.b), (0.0, 0.0));
        let w = assemble(&BlockOrdering::canonical_unprepare(), &angles, SynthesisMode::Unprepare);
        assert!(contract_residual(&target, &w, SynthesisMode::Unprepare) < 1e-15);
    }

    #[test]
    fn select_ordering_examples() {
        let [s0, s1, s2] = BlockSlot::ALL;
        let o = select_ordering(&TargetVec::normalized([0.9, 0.3, 0.35, 0.1]).unwrap());
        assert_eq!(o, BlockOrdering { permutation: [s1, s2, s0], pre_flip: true });
        let o = select_ordering(&tv([0.5; 4]));
        assert_eq!(o.permutation, [s0, s1, s2]);
        assert!(o.pre_flip);
        assert_eq!(select_ordering(&tv([1.0, 0.0, 0.0, 0.0])), BlockOrdering::canonical_prepare());
    }

    #[test]
    fn general_zero_angles_for_ground_state() {
        let target = tv([1.0, 0.0, 0.0, 0.0]);
        let ordering = select_ordering(&target);
        let angles = solve_angles_general(&target, &ordering, SynthesisMode::Prepare).unwrap();
        assert_eq!(angles, AngleTriple::ZERO);
        assert_eq!(build_ua(&target).unwrap(), Unitary4::identity());
    }

    #[test]
    fn build_ub_identity_for_last_basis_state() {
        let target = tv([0.0, 0.0, 0.0, 1.0]);
        let u = build_ub(&target).unwrap();
        assert!(u.max_abs_diff(&Unitary4::identity()) < 1e-15);
    }

    #[test]
    fn feature_vector_column() {
        let f = qkernel_oracle::feature_map(0.54, 0.54).unwrap();
        assert!((f[3] - 0.1252f64.sqrt()).abs() < 1e-15);
        let u = build_ua(&tv(f)).unwrap();
        let col = u.column(0);
        for k in 0..4 {
            assert!((col[k].re - f[k]).abs() < CONTRACT_TOL);
        }
    }

    #[test]
    fn refinement_recovers_perturbed_angles() {
        let target = TargetVec::normalized([0.2, -0.4, 0.5, 0.7]).unwrap();
        let ordering = select_ordering(&target);
        let exact = solve_angles_general(&target, &ordering, SynthesisMode::Prepare).unwrap();
        let perturbed = AngleTriple::new(exact.a + 1e-3, exact.b - 2e-3, exact.c + 1e-3);
        let (refined, residual) = refine(&target, &ordering, perturbed);
        assert!(residual < 1e-13, "{residual}");
        assert!(max_diff(&reconstruct(&ordering, &refined), target.components()) < 1e-13);
    }

    #[test]
    fn circuits_match_operators() {
        let target = TargetVec::normalized([0.3, -0.6, 0.2, 0.7]).unwrap();
        for mode in [SynthesisMode::Prepare, SynthesisMode::Unprepare] {
            let s = synthesize(&target, mode).unwrap();
            let gates = circuit(&s.ordering, &s.angles, mode).unwrap();
            let mut u = Unitary4::identity();
            for g in &gates {
                u = g.to_unitary4().unwrap() * u;
            }
            assert!(u.max_abs_diff(&s.operator) < 1e-12);
        }
        // Canonical ordering, no flip.
        let ordering = BlockOrdering::canonical_prepare();
        let angles = AngleTriple::new(0.4, 1.3, -2.0);
        for mode in [SynthesisMode::Prepare, SynthesisMode::Unprepare] {
            let gates = circuit(&ordering, &angles, mode).unwrap();
            let mut u = Unitary4::identity();
            for g in &gates {
                u = g.to_unitary4().unwrap() * u;
            }
            assert!(u.max_abs_diff(&assemble(&ordering, &angles, mode)) < 1e-12);
        }
    }

    fn unit4() -> impl Strategy<Value = TargetVec> {
        prop::array::uniform4(-1.0f64..1.0)
            .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-6)
            .prop_map(|v| TargetVec::normalized(v).unwrap())
    }

    fn decreasing_magnitudes() -> impl Strategy<Value = TargetVec> {
        (unit4(), prop::array::uniform4(prop::bool::ANY)).prop_map(|(v, signs)| {
            let mut mags = v.components().map(f64::abs);
            mags.sort_by(|a, b| b.total_cmp(a));
            let mut out = [0.0; 4];
            for k in 0..4 {
                out[k] = if signs[k] { mags[k] } else { -mags[k] };
            }
            TargetVec::new(out).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn canonical_ua_reconstructs(target in decreasing_magnitudes()) {
            prop_assume!(target.components()[0].abs() < 0.999);
            let angles = canonical_angles_ua(&target).unwrap();
            let v = reconstruct(&BlockOrdering::canonical_prepare(), &angles);
            prop_assert!(max_diff(&v, target.components()) < CONTRACT_TOL);
        }

        #[test]
        fn canonical_ub_maps_to_last_basis_state(target in unit4()) {
            let v = target.components();
            prop_assume!((v[0] * v[0] + v[3] * v[3]).sqrt() > 1e-3 && v[2].abs() < 0.999);
            let angles = canonical_angles_ub(&target).unwrap();
            let w = assemble(&BlockOrdering::canonical_unprepare(), &angles, SynthesisMode::Unprepare);
            prop_assert!(contract_residual(&target, &w, SynthesisMode::Unprepare) < CONTRACT_TOL);
        }

        #[test]
        fn preparation_contract(target in unit4()) {
            let u = build_ua(&target).unwrap();
            prop_assert!(u.unitarity_deviation() < ALGEBRAIC_TOL);
            let col = u.column(0);
            for k in 0..4 {
                prop_assert!((col[k].re - target.components()[k]).abs() < CONTRACT_TOL);
                prop_assert!(col[k].im.abs() < CONTRACT_TOL);
            }
        }

        #[test]
        fn unpreparation_contract(target in unit4()) {
            let u = build_ub(&target).unwrap();
            prop_assert!(u.unitarity_deviation() < ALGEBRAIC_TOL);
            let row = u.row(3);
            for k in 0..4 {
                prop_assert!((row[k].re - target.components()[k]).abs() < CONTRACT_TOL);
            }
            let out = u.apply_real(target.components());
            prop_assert!(max_diff(&out, &[0.0, 0.0, 0.0, 1.0]) < CONTRACT_TOL);
        }

        #[test]
        fn round_trip_lands_on_last_basis_state(target in unit4()) {
            let ua = build_ua(&target).unwrap();
            let ub = build_ub(&target).unwrap();
            let state = StateVector::zero_state(2).unwrap()
                .apply_unitary(&ua, (0, 1)).unwrap()
                .apply_unitary(&ub, (0, 1)).unwrap();
            prop_assert!((state.probability(3).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn every_ordering_is_solvable(target in unit4(), perm in 0usize..6) {
            // Reordered chains from |11> are well conditioned only when sorted,
            // but the lenient walk plus refinement must still satisfy the contract
            // whenever the sorted denominators are not tiny.
            let [s0, s1, s2] = BlockSlot::ALL;
            let perms = [[s0, s1, s2], [s0, s2, s1], [s1, s0, s2], [s1, s2, s0], [s2, s0, s1], [s2, s1, s0]];
            let ordering = BlockOrdering::new(perms[perm], true).unwrap();
            let v = target.components();
            let p = perms[perm];
            let d1 = (1.0 - v[p[0].index()].powi(2)).sqrt();
            let d2 = (v[p[2].index()].powi(2) + v[3] * v[3]).sqrt();
            prop_assume!(d1 > 1e-3 && d2 > 1e-3);
            let angles = solve_angles_general(&target, &ordering, SynthesisMode::Prepare).unwrap();
            prop_assert!(max_diff(&reconstruct(&ordering, &angles), v) < CONTRACT_TOL);
        }
    }
}

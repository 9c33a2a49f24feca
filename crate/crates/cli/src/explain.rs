//! Static descriptions of the checks, keyed by the id prefix before `/`.

pub const CHECKS: &[(&str, &str)] = &[
    (
        "background-shift",
        "Changing the background connection shifts the Chern–Simons action by a boundary term:\n  \
         CS_{p,A₀′}(g) = CS_{p,A₀}(g) + ∫_M Tp(A₀, A₀′).\n\
         Residual: |CS_{A₀′} − CS_{A₀} − ∫Tp(A₀, A₀′)| on the fine grid.",
    ),
    (
        "background-shift-refinement",
        "Same identity on a coarse and a fine grid. The fine residual must be 2⁴ times smaller per halving \
         of h, unless both residuals already sit at the round-off floor 64·ε·(|CS_{A₀}| + |CS_{A₀′}| + |shift|).",
    ),
    (
        "metric-independence",
        "The variation δ_φ^p(g) = CS_{p,A₀}(φ·g) − CS_{p,A₀}(g) does not depend on g.\n\
         Residual: spread of δ_φ^p over the listed metrics.",
    ),
    (
        "cocycle",
        "δ^p is additive under composition: δ_{φ∘ψ}^p = δ_φ^p + δ_ψ^p.\nResidual: |δ_{φ∘ψ} − δ_φ − δ_ψ|.",
    ),
    (
        "identity-component",
        "For φ isotopic to the identity the variation vanishes: δ_φ^p = 0.\n\
         Residual: |δ_φ^p|; φ must also be in the identity component.",
    ),
    (
        "mapping-torus-agreement",
        "The variation equals the characteristic number of the mapping torus: δ_φ^p = p(M_φ) = ∫_{M×[0,1]} p(F̄),\n\
         with F̄ the curvature of ω̄ = (1−χ(t))ω^g + χ(t)ω^{φ·g}. The left side is a 3-d computation and the \
         right side a 4-d one. On T³ both vanish, so each must also be below the tolerance.",
    ),
    (
        "orientation-reversal",
        "For orientation-reversing φ the variation is half that of φ²: δ_φ^p = ½ δ_{φ²}^p.\n\
         Residual: |δ_φ − ½δ_{φ²}|.",
    ),
    (
        "lie-direction",
        "σ^p annihilates infinitesimal diffeomorphisms: σ^p_g(L_X g) = 0.\nResidual: |σ^p_g(L_X g)|.",
    ),
    (
        "cotton-agreement",
        "The variation of CS_{tr²} is the Cotton tensor: −½ σ^{tr²}_g(h) = ∫ C^{ij} h_{ij}, with\n  \
         C^{ij} = sym(ε̃^{ikl} ∇_k S^j_l) and S the Schouten tensor.\n\
         Residual: relative difference of the two pairings on a metric that is not conformally flat.",
    ),
    (
        "cotton-conformally-flat",
        "A conformally flat metric has vanishing Cotton tensor; both pairings must vanish.\n\
         Residual: the larger of the two pairings in absolute value.",
    ),
    (
        "path-independence",
        "For a flat connection the holonomy ∫_γ σ^p along paths γ from g to φ·g does not depend on γ.\n\
         Residual: spread of the path integrals.",
    ),
    (
        "path-matches-delta",
        "∫_γ σ^p equals the action difference between the path's ends, δ_φ^p for paths in the class of φ.\n\
         Residual: |∫_γ σ^p − (CS(γ(1)) − CS(γ(0)))|.",
    ),
    (
        "flat-holonomy",
        "A supplied flat holonomy κ_φ cancels against the counterterm when κ_φ ≡ p(M_φ) mod ℤ \
         (½p(M_{φ²}) for orientation-reversing φ).\n\
         Residual: min_k |κ_φ − p(M_φ) − k|; the check passes when the verdict matches the expected one.",
    ),
    (
        "quarter-eta",
        "Exact ¼η of the operator family on a ledger entry, mod 1: σ/32 for Majorana fermions on oriented \
         4-manifolds, tabulated values otherwise (¼η(ℝP⁴) = 1/16).",
    ),
    (
        "condition",
        "Anomaly-cancellation congruence on each entry, exact mod 1:\n  \
         oriented:     ν·¼η(N) ≡ c·p₁(N)\n  \
         unorientable: ν·¼η(N) ≡ ½c·p₁(Ñ)  (Ñ the orientable double cover)\n  \
         AnnomFinalW:  ν·¼η(N) ≡ 0.\n\
         The check passes when the verdict matches the expected one.",
    ),
    (
        "counterterm",
        "Solves the congruences for the counterterm p = c·p₁ by clearing denominators and a generalized \
         Chinese remainder step. Reports the least non-negative c and the period of the solution set; \
         for Majorana fermions on oriented entries c = 1/96.",
    ),
    (
        "nu-multiplicity",
        "Smallest number ν of Majorana fermions for which the condition can be met. With ℝP⁴ present \
         ν = 16; on mapping tori with ¼η ∈ (1/8)ℤ, ν = 8.",
    ),
];

pub fn explain(id: &str) -> Result<&'static str, String> {
    let key = id.split('/').next().unwrap_or(id);
    CHECKS.iter().find(|(k, _)| *k == key).map(|(_, text)| *text).ok_or_else(|| {
        let known: Vec<&str> = CHECKS.iter().map(|(k, _)| *k).collect();
        let close: Vec<&str> = known.iter().copied().filter(|k| k.contains(key) || key.contains(k)).collect();
        let suggest = if close.is_empty() { known } else { close };
        format!("unknown check id {id:?}; known ids: {}", suggest.join(", "))
    })
}

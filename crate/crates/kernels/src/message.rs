use ndarray::{Array1, ArrayView2};

use crate::error::{check_len, check_shape, KernelError, Result};

/// Perimeter-inward zone order used by the benchmark topology.
pub const DEFAULT_ZONE_CHAIN: [&str; 3] = ["DMZ", "Corporate", "SecureVault"];

/// Routes zone summaries one hop inward along `chain`.
///
/// For every consecutive pair `(outer, inner)` present in `embeddings`,
/// `inner += W_msg · outer`, using the values from before this call so that
/// information moves exactly one hop per invocation. Zones in the chain but
/// absent from `embeddings` are skipped.
pub fn topology_message_pass(
    embeddings: &[(String, Array1<f64>)],
    chain: &[&str],
    w_msg: ArrayView2<f64>,
) -> Result<Vec<(String, Array1<f64>)>> {
    let mut slots: Vec<Option<usize>> = vec![None; chain.len()];
    for (idx, (name, emb)) in embeddings.iter().enumerate() {
        let pos = chain
            .iter()
            .position(|z| z == name)
            .ok_or_else(|| KernelError::UnknownZone(name.clone()))?;
        check_shape("message weight", (emb.len(), emb.len()), w_msg.dim())?;
        slots[pos] = Some(idx);
    }

    let mut out: Vec<(String, Array1<f64>)> = embeddings.to_vec();
    for pair in slots.windows(2) {
        if let [Some(outer), Some(inner)] = *pair {
            let outer_emb = &embeddings[outer].1;
            check_len("zone embedding width", out[inner].1.len(), outer_emb.len())?;
            let msg = w_msg.dot(outer_emb);
            out[inner].1 += &msg;
        }
    }
    Ok(out)
}

/// Index-based variant used by the forward cell: `zones[i]` is the summary
/// for chain position `i`.
pub(crate) fn message_pass_chain(zones: &[Array1<f64>], w_msg: ArrayView2<f64>) -> Vec<Array1<f64>> {
    let mut out = zones.to_vec();
    for i in 1..zones.len() {
        out[i] = &zones[i] + &w_msg.dot(&zones[i - 1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn named(v: &[(&str, Array1<f64>)]) -> Vec<(String, Array1<f64>)> {
        v.iter().map(|(n, e)| (n.to_string(), e.clone())).collect()
    }

    #[test]
    fn zero_weight_leaves_embeddings_unchanged() {
        let input = named(&[
            ("DMZ", array![1.0, 2.0]),
            ("Corporate", array![3.0, 4.0]),
            ("SecureVault", array![5.0, 6.0]),
        ]);
        let out = topology_message_pass(&input, &DEFAULT_ZONE_CHAIN, Array2::zeros((2, 2)).view()).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn identity_weight_copies_outer_into_empty_inner() {
        let input = named(&[("DMZ", array![1.0, -2.0]), ("Corporate", array![0.0, 0.0])]);
        let out = topology_message_pass(&input, &DEFAULT_ZONE_CHAIN, Array2::eye(2).view()).unwrap();
        assert_eq!(out[1].1, array![1.0, -2.0]);
        assert_eq!(out[0].1, array![1.0, -2.0]);
    }

    #[test]
    fn one_hop_per_call() {
        let input = named(&[
            ("DMZ", array![1.0]),
            ("Corporate", array![0.0]),
            ("SecureVault", array![0.0]),
        ]);
        let w = Array2::eye(1);
        let once = topology_message_pass(&input, &DEFAULT_ZONE_CHAIN, w.view()).unwrap();
        assert_eq!(once[2].1[0], 0.0);
        let twice = topology_message_pass(&once, &DEFAULT_ZONE_CHAIN, w.view()).unwrap();
        assert_eq!(twice[2].1[0], 1.0);
    }

    #[test]
    fn unknown_zone_is_an_error() {
        let input = named(&[("Internet", array![1.0])]);
        assert!(matches!(
            topology_message_pass(&input, &DEFAULT_ZONE_CHAIN, Array2::eye(1).view()),
            Err(KernelError::UnknownZone(z)) if z == "Internet"
        ));
    }
}

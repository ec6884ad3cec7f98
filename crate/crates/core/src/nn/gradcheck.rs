use super::{Graph, ParamStore, Var};
use crate::error::{Error, Result};

/// Which parameter entries to probe with finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    /// Every scalar of every parameter.
    All,
    /// At most this many evenly spaced entries of every parameter.
    PerParam(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Reverse-mode and finite-difference values at the worst entry.
    pub worst_values: (f64, f64),
    pub checked: usize,
    /// Norm-based relative error of every probed parameter array.
    pub per_param: Vec<(String, f64)>,
}

/// Compares reverse-mode gradients of a scalar objective with central differences.
///
/// The relative error of an entry is `|g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|)`;
/// the report carries the maximum over all probed entries.
pub fn grad_check<F>(store: &ParamStore, eps: f64, probe: Probe, objective: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::invalid(format!("eps {eps} outside (0, 1e-2]")));
    }
    let evaluate = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let out = objective(&mut g, s)?;
        if g.shape(out) != (1, 1) {
            return Err(Error::invalid(format!(
                "objective must be scalar, got {:?}",
                g.shape(out)
            )));
        }
        Ok(g.value(out).item())
    };

    let mut analytic = store.clone();
    analytic.zero_grad();
    {
        let mut g = Graph::new();
        let out = objective(&mut g, &analytic)?;
        g.backward(out, &mut analytic)?;
    }

    let mut probe_store = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        checked: 0,
        per_param: Vec::new(),
    };
    for id in store.ids() {
        let len = store.value(id).len();
        let indices: Vec<usize> = match probe {
            Probe::All => (0..len).collect(),
            Probe::PerParam(k) if k >= len => (0..len).collect(),
            Probe::PerParam(k) => (0..k).map(|t| t * len / k).collect(),
        };
        let (mut diff2, mut ad2, mut fd2) = (0.0, 0.0, 0.0);
        for idx in indices {
            let orig = store.value(id).data()[idx];
            probe_store.get_mut(id).value.data_mut()[idx] = orig + eps;
            let up = evaluate(&probe_store)?;
            probe_store.get_mut(id).value.data_mut()[idx] = orig - eps;
            let down = evaluate(&probe_store)?;
            probe_store.get_mut(id).value.data_mut()[idx] = orig;

            let fd = (up - down) / (2.0 * eps);
            let ad = analytic.get(id).grad.data()[idx];
            let rel = (ad - fd).abs() / (ad.abs() + fd.abs()).max(1e-8);
            report.checked += 1;
            diff2 += (ad - fd) * (ad - fd);
            ad2 += ad * ad;
            fd2 += fd * fd;
            if rel >= report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((store.name(id).to_owned(), idx));
                report.worst_values = (ad, fd);
            }
        }
        let rel = diff2.sqrt() / (ad2.sqrt() + fd2.sqrt()).max(1e-8);
        report.per_param.push((store.name(id).to_owned(), rel));
    }
    Ok(report)
}

use hgrl_core::env::GraphObservation;
use hgrl_nn::{GraphSample, Matrix};

use crate::error::Result;

/// Network input for CAV `id`: its receptive field of `hops` rounds plus its state vector.
pub fn sample_for(obs: &GraphObservation, id: u32, hops: usize) -> Result<GraphSample> {
    let (ego, state) = obs.sample(id, hops)?;
    Ok(GraphSample {
        features: Matrix::new(ego.ids.len(), ego.cols, ego.features)?,
        edges: ego.edges,
        ego: 0,
        state,
    })
}

/// Samples for every CAV in the observation, in id order.
pub fn samples_for(obs: &GraphObservation, hops: usize) -> Result<Vec<(u32, GraphSample)>> {
    obs.agents.iter().map(|a| Ok((a.id, sample_for(obs, a.id, hops)?))).collect()
}

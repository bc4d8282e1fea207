use crate::error::{check_len, Error, Result};
use crate::problem::{
    grad_objective, objective, soc_margins_with_grad, Beamformer, ChannelSet, ProblemSpec,
};
use crate::projection::{is_feasible, project, projection_vjp, ProjectionResult, ProjectorConfig, REPORT_TOL};

/// Projection of a raw output onto the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub y: Vec<f64>,
    pub distance: f64,
}

/// A parametric program `min f(x) s.t. x in C(phi)` seen through the flat
/// real coordinates the network produces.
pub trait ConstrainedProgram: Sync {
    /// Network input `phi`.
    fn features(&self) -> Vec<f64>;
    /// Length of `x`.
    fn var_dim(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn is_feasible(&self, x: &[f64]) -> bool;
    fn project(&self, x: &[f64]) -> Result<Projected>;
    /// Projects `x` to `y` and returns `J^T upstream(y)`, where `J` is the
    /// Jacobian of the projection map at `x`.
    fn project_pullback(
        &self,
        x: &[f64],
        upstream: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Projected, Vec<f64>)>;
    /// Constraint margins (feasible iff all `>= 0`) and their gradients.
    fn margins_with_grad(&self, x: &[f64]) -> Vec<(f64, Vec<f64>)>;
}

/// One beamforming instance together with the problem it is solved for.
#[derive(Debug, Clone, Copy)]
pub struct BeamformingTask<'a> {
    pub channels: &'a ChannelSet,
    pub problem: &'a ProblemSpec,
    pub projector: &'a ProjectorConfig,
}

impl<'a> BeamformingTask<'a> {
    pub fn new(
        channels: &'a ChannelSet,
        problem: &'a ProblemSpec,
        projector: &'a ProjectorConfig,
    ) -> Self {
        Self {
            channels,
            problem,
            projector,
        }
    }

    fn beamformer(&self, x: &[f64]) -> Beamformer {
        Beamformer::from_flat(
            self.channels.n_antennas(),
            self.channels.n_users(),
            x.to_vec(),
        )
        .expect("caller checked the output length")
    }

    fn checked_projection(&self, x: &[f64]) -> Result<ProjectionResult> {
        check_len(self.var_dim(), x.len())?;
        let result = project(&self.beamformer(x), self.channels, self.projector)?;
        if !is_feasible(&result.y, self.channels, REPORT_TOL) {
            return Err(Error::InfeasibleRegion);
        }
        Ok(result)
    }

    /// Wraps every instance of `channels` with the same problem and projector.
    pub fn batch(
        channels: &'a [ChannelSet],
        problem: &'a ProblemSpec,
        projector: &'a ProjectorConfig,
    ) -> Vec<Self> {
        channels
            .iter()
            .map(|ch| Self::new(ch, problem, projector))
            .collect()
    }
}

impl ConstrainedProgram for BeamformingTask<'_> {
    fn features(&self) -> Vec<f64> {
        self.channels.features()
    }

    fn var_dim(&self) -> usize {
        self.channels.var_dim()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        objective(&self.beamformer(x), self.channels, self.problem)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        grad_objective(&self.beamformer(x), self.channels, self.problem)
    }

    fn is_feasible(&self, x: &[f64]) -> bool {
        is_feasible(&self.beamformer(x), self.channels, self.projector.feas_tol)
    }

    fn project(&self, x: &[f64]) -> Result<Projected> {
        let result = self.checked_projection(x)?;
        Ok(Projected {
            distance: result.distance,
            y: result.y.into_flat(),
        })
    }

    fn project_pullback(
        &self,
        x: &[f64],
        upstream: &dyn Fn(&[f64]) -> Vec<f64>,
    ) -> Result<(Projected, Vec<f64>)> {
        let result = self.checked_projection(x)?;
        let pulled = projection_vjp(self.channels, &result, &upstream(result.y.flatten()))?;
        Ok((
            Projected {
                distance: result.distance,
                y: result.y.into_flat(),
            },
            pulled,
        ))
    }

    fn margins_with_grad(&self, x: &[f64]) -> Vec<(f64, Vec<f64>)> {
        soc_margins_with_grad(&self.beamformer(x), self.channels)
    }
}

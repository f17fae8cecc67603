//! The A–H optimizer × loss × fingertip-weight × stages grid.

use serde::Serialize;

use crate::objectives::LossKind;
use crate::pipeline::{FitOptions, Stages};
use crate::solver::Method;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationConfig {
    pub id: &'static str,
    pub optimizer: Method,
    pub loss: LossKind,
    pub fingertip_weight: f64,
    pub stages: Stages,
}

impl AblationConfig {
    /// `base` with this row's optimizer, loss, fingertip weight and stages.
    pub fn apply(&self, base: &FitOptions) -> FitOptions {
        let mut o = *base;
        o.solver.method = self.optimizer;
        o.loss.kind = self.loss;
        o.loss.fingertip_weight = self.fingertip_weight;
        o.stages = self.stages;
        o
    }
}

const fn row(
    id: &'static str,
    optimizer: Method,
    loss: LossKind,
    fingertip_weight: f64,
    stages: Stages,
) -> AblationConfig {
    AblationConfig {
        id,
        optimizer,
        loss,
        fingertip_weight,
        stages,
    }
}

pub const ABLATION_GRID: [AblationConfig; 8] = [
    row("A", Method::Lbfgs, LossKind::Mse, 5.0, Stages::One),
    row("B", Method::Lbfgs, LossKind::Mse, 1.0, Stages::One),
    row("C", Method::Lbfgs, LossKind::GemanMcclure, 5.0, Stages::One),
    row("D", Method::Lbfgs, LossKind::GemanMcclure, 1.0, Stages::One),
    row("E", Method::Lbfgs, LossKind::Huber, 5.0, Stages::One),
    row("F", Method::Lbfgs, LossKind::Huber, 1.0, Stages::One),
    row("G", Method::Bfgs, LossKind::Mse, 5.0, Stages::One),
    row("H", Method::Lbfgs, LossKind::Mse, 1.0, Stages::Two),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    #[serde(flatten)]
    pub config: AblationConfig,
    pub epe_mm: f64,
    pub auc: f64,
    pub frames: usize,
    pub failures: usize,
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::from(
        "id  optimizer  loss           tip_w  stages  EPE(mm)    AUC    frames  failed\n",
    );
    for r in rows {
        let c = &r.config;
        out += &format!(
            "{:<3} {:<10} {:<14} {:<6} {:<7} {:<10.3} {:<6.3} {:<7} {}\n",
            c.id,
            c.optimizer.as_str(),
            c.loss.as_str(),
            c.fingertip_weight,
            match c.stages {
                Stages::One => 1,
                Stages::Two => 2,
            },
            r.epe_mm,
            r.auc,
            r.frames,
            r.failures
        );
    }
    out
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out =
        String::from("id,optimizer,loss,fingertip_weight,stages,epe_mm,auc,frames,failures\n");
    for r in rows {
        let c = &r.config;
        out += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.id,
            c.optimizer.as_str(),
            c.loss.as_str(),
            c.fingertip_weight,
            if c.stages == Stages::One { 1 } else { 2 },
            r.epe_mm,
            r.auc,
            r.frames,
            r.failures
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_each_factor() {
        let ids: String = ABLATION_GRID.iter().map(|c| c.id).collect();
        assert_eq!(ids, "ABCDEFGH");
        assert_eq!(
            ABLATION_GRID
                .iter()
                .filter(|c| c.optimizer == Method::Bfgs)
                .count(),
            1
        );
        assert_eq!(
            ABLATION_GRID
                .iter()
                .filter(|c| c.stages == Stages::Two)
                .count(),
            1
        );
        for k in [LossKind::Mse, LossKind::GemanMcclure, LossKind::Huber] {
            let ws: Vec<f64> = ABLATION_GRID[..6]
                .iter()
                .filter(|c| c.loss == k)
                .map(|c| c.fingertip_weight)
                .collect();
            assert_eq!(ws, vec![5.0, 1.0]);
        }
    }

    #[test]
    fn apply_overrides_only_grid_fields() {
        let mut base = FitOptions::default();
        base.loss.rho = 11.0;
        let o = ABLATION_GRID[7].apply(&base);
        assert_eq!(o.stages, Stages::Two);
        assert_eq!(o.loss.fingertip_weight, 1.0);
        assert_eq!(o.loss.rho, 11.0);
    }
}

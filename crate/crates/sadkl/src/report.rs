//! CSV outputs of training and evaluation runs.

use std::io::Write;
use std::path::Path;

use sadkl_core::eval::{BoundaryGrid, RocCurve};
use sadkl_core::sadkl::IterationRecord;

use crate::csvio::{create, finish, fmt_f64};
use crate::error::{CliError, Result};

/// `t,eta,delta,mean_loss,train_auc`; `train_auc` is empty when undefined.
pub fn save_history(history: &[IterationRecord], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "t,eta,delta,mean_loss,train_auc").map_err(io)?;
    for r in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t,
            fmt_f64(r.eta),
            fmt_f64(r.delta),
            fmt_f64(r.mean_loss),
            r.train_auc.map(fmt_f64).unwrap_or_default()
        )
        .map_err(io)?;
    }
    finish(path, w)
}

/// `epoch,mse`, epoch 0 being the untrained network.
pub fn save_pretrain_history(mse: &[f64], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "epoch,mse").map_err(io)?;
    for (i, &m) in mse.iter().enumerate() {
        writeln!(w, "{i},{}", fmt_f64(m)).map_err(io)?;
    }
    finish(path, w)
}

pub fn save_roc(roc: &RocCurve, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "# auc,{}", fmt_f64(roc.auc)).map_err(io)?;
    writeln!(w, "fpr,tpr").map_err(io)?;
    for &(fpr, tpr) in &roc.points {
        writeln!(w, "{},{}", fmt_f64(fpr), fmt_f64(tpr)).map_err(io)?;
    }
    finish(path, w)
}

/// `x,y,normalized_score` in grid order, preceded by a comment line holding
/// the contour level or `flat` for a constant field.
pub fn save_grid(grid: &BoundaryGrid, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    match grid.level {
        Some(level) => writeln!(w, "# contour_level,{}", fmt_f64(level)),
        None => writeln!(w, "# contour_level,flat"),
    }
    .map_err(io)?;
    writeln!(w, "x,y,normalized_score").map_err(io)?;
    for j in 0..grid.spec.ny {
        for i in 0..grid.spec.nx {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(grid.x(i)),
                fmt_f64(grid.y(j)),
                fmt_f64(grid.value(i, j))
            )
            .map_err(io)?;
        }
    }
    finish(path, w)
}

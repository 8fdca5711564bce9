//! Per-agent local observations.

use crate::config::ScenarioConfig;
use crate::error::SimError;
use crate::vehicle::{VehicleKind, VehicleRecord};

/// Fixed-size observation: one row for the observing agent followed by the
/// nearest alive vehicles inside the sensing radius, nearest first; unused
/// rows stay all-zero (presence flag 0).
///
/// Row layout: `[presence, priority, x_rel, y_rel, vx_rel, vy_rel]`, with
/// positions normalized by the sensing radius and velocities by the agent
/// speed cap, everything clamped to `[-1, 1]`. The self row uses zero
/// relative position and absolute normalized velocity. With heading angles
/// enabled, `[cos(ζ), sin(ζ)]` of each observed vehicle's velocity vector is
/// appended to its row.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ObservationMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ObservationMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn row_slice_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

fn heading(vx: f64, vy: f64) -> (f64, f64) {
    let zeta = vy.atan2(vx);
    (zeta.cos(), zeta.sin())
}

/// Builds the observation for one agent. The agent must exist, be
/// controllable and alive.
pub fn observe(
    cfg: &ScenarioConfig,
    vehicles: &[VehicleRecord],
    agent_id: u32,
) -> Result<ObservationMatrix, SimError> {
    let me = vehicles
        .iter()
        .find(|v| v.id == agent_id)
        .ok_or(SimError::UnknownAgent(agent_id))?;
    if me.kind != VehicleKind::Cav {
        return Err(SimError::NotAnAgent(agent_id));
    }
    if !me.alive {
        return Err(SimError::DeadAgent(agent_id));
    }

    let radius = cfg.sensing_radius;
    let v_norm = cfg.speeds.v_max_cav;
    let width = cfg.obs_width();
    let mut obs = ObservationMatrix::zeros(cfg.n_obs, width);

    let clamp1 = |v: f64| v.clamp(-1.0, 1.0);

    // Self row: present, not the PV, zero relative position, absolute speed.
    {
        let row = obs.row_slice_mut(0);
        row[0] = 1.0;
        row[1] = 0.0;
        row[2] = 0.0;
        row[3] = 0.0;
        row[4] = clamp1(me.vx / v_norm);
        row[5] = clamp1(me.vy / v_norm);
        if cfg.include_angles {
            let (c, s) = heading(me.vx, me.vy);
            row[6] = c;
            row[7] = s;
        }
    }

    // Candidate neighbors: alive, not self, inside the sensing radius.
    // Nearest first; ties broken by id so the ordering is total.
    let mut neighbors: Vec<(f64, &VehicleRecord)> = vehicles
        .iter()
        .filter(|v| v.alive && v.id != agent_id)
        .filter_map(|v| {
            let d = ((v.x - me.x).powi(2) + (v.y - me.y).powi(2)).sqrt();
            (d <= radius).then_some((d, v))
        })
        .collect();
    neighbors.sort_by(|(da, va), (db, vb)| da.total_cmp(db).then(va.id.cmp(&vb.id)));

    for (slot, (_, v)) in neighbors.iter().take(cfg.n_obs.saturating_sub(1)).enumerate() {
        let row = obs.row_slice_mut(slot + 1);
        row[0] = 1.0;
        row[1] = if v.kind == VehicleKind::Pv { 1.0 } else { 0.0 };
        row[2] = clamp1((v.x - me.x) / radius);
        row[3] = clamp1((v.y - me.y) / radius);
        row[4] = clamp1((v.vx - me.vx) / v_norm);
        row[5] = clamp1((v.vy - me.vy) / v_norm);
        if cfg.include_angles {
            let (c, s) = heading(v.vx, v.vy);
            row[6] = c;
            row[7] = s;
        }
    }

    Ok(obs)
}

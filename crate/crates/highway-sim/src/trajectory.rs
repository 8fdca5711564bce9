//! Episode trace logging: one CSV row per vehicle per policy step.

use crate::vehicle::{AgentAction, VehicleRecord};
use std::io::{self, Write};

/// Column header written by [`TrajectoryWriter`].
pub const TRAJECTORY_HEADER: &str = "step,vehicle_id,kind,lane,x,y,vx,vy,action,reward";

/// Streams episode traces as CSV. Floats are fixed to three decimals so
/// identical episodes serialize byte-identically; the `action` column is
/// the agent's action label and stays empty for scripted vehicles and for
/// wrecks, and `reward` repeats the shared team reward on every row of the
/// step.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    /// Wraps a sink and writes the header line.
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        Ok(TrajectoryWriter { out })
    }

    /// Appends one row per vehicle (id order) for a completed step.
    /// `actions` pairs agent ids with the action they took this step.
    pub fn record_step(
        &mut self,
        step: u32,
        vehicles: &[VehicleRecord],
        actions: &[(u32, AgentAction)],
        reward: f64,
    ) -> io::Result<()> {
        for v in vehicles {
            let action = actions
                .iter()
                .find(|(id, _)| *id == v.id)
                .map(|(_, a)| a.label())
                .unwrap_or("");
            writeln!(
                self.out,
                "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{},{:.3}",
                step,
                v.id,
                v.kind.label(),
                v.lane,
                v.x,
                v.y,
                v.vx,
                v.vy,
                action,
                reward
            )?;
        }
        Ok(())
    }

    /// Flushes and returns the underlying sink.
    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

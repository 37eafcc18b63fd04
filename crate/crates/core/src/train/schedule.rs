/// Step decay: `lr0 · decay^floor(epoch / every)`.
pub fn lr_schedule(epoch: usize, lr0: f64, decay: f64, every: usize) -> f64 {
    lr0 * decay.powi((epoch / every.max(1)) as i32)
}

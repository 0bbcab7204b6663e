pub mod benchmark;
pub mod eval_pose;
pub mod eval_recon;
pub mod export_ply;
pub mod gen_data;
pub mod infer;
pub mod train;

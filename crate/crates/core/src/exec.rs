//! Execution strategy for the data-parallel loops.
//!
//! `Exec::Parallel` uses rayon when the `parallel` feature is enabled and
//! silently runs sequentially otherwise. Results are identical either way:
//! every reduction used with these helpers is associative and applied in
//! input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

pub(crate) fn map<T, R, F>(exec: Exec, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

pub(crate) fn map_reduce<T, R, F, I, O>(exec: Exec, items: &[T], f: F, identity: I, op: O) -> R
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
    I: Fn() -> R + Sync + Send,
    O: Fn(R, R) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).reduce(identity, op);
    }
    let _ = exec;
    items.iter().map(f).fold(identity(), op)
}

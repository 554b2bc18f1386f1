use anyhow::{bail, Context, Result};

/// Environment variable capping the worker threads of a campaign.
pub const THREADS_ENV: &str = "LCULAB_THREADS";

/// Thread cap from `LCULAB_THREADS`; `None` leaves the choice to rayon.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => {
            let n: usize = s
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={s:?} is not a thread count"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
    }
}

pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::arrival::ArrivalModel;
use crate::error::Result;
use crate::kernel::{ConditionalKernel, Priority};
use crate::limits::Limits;

type Key = (Vec<u64>, Priority, usize, usize, usize);

/// Conditional output kernels keyed by arrival law, priority and limits.
///
/// Shared across threads; a kernel requested concurrently for the first time
/// may be built twice, which is harmless.
#[derive(Debug, Default)]
pub struct KernelCache {
    map: Mutex<HashMap<Key, Arc<ConditionalKernel>>>,
}

impl KernelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, model: &ArrivalModel, priority: Priority, limits: &Limits) -> Result<Arc<ConditionalKernel>> {
        let key = (model.cache_key(), priority, limits.n1, limits.n2, limits.n3);
        if let Some(k) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(k));
        }
        let kernel = Arc::new(ConditionalKernel::build(model, priority, limits)?);
        self.map
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| Arc::clone(&kernel));
        Ok(kernel)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.lock().expect("cache lock").clear();
    }
}

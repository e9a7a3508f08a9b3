use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use super::IsaError;

pub const PAGE_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Privilege {
    User,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Page {
    privilege: Privilege,
    bytes: Box<[u8]>,
}

/// Byte-addressed memory with per-page privilege tags.
///
/// Pages are shared copy-on-write, so checkpointing a state is cheap.
/// Privilege tags are fixed by [`MemoryBuilder`]; afterwards only the
/// contents of already mapped pages can change.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorySpace {
    pages: Arc<BTreeMap<u64, Page>>,
    residency: Option<f64>,
}

impl Default for MemorySpace {
    fn default() -> Self {
        MemoryBuilder::new().build()
    }
}

impl MemorySpace {
    pub fn builder() -> MemoryBuilder {
        MemoryBuilder::new()
    }

    pub fn page_of(addr: u64) -> u64 {
        addr / PAGE_SIZE
    }

    pub fn privilege(&self, addr: u64) -> Option<Privilege> {
        self.pages.get(&Self::page_of(addr)).map(|p| p.privilege)
    }

    pub fn is_mapped(&self, addr: u64) -> bool {
        self.privilege(addr).is_some()
    }

    /// Raw read ignoring privilege. Privilege policy is the caller's job.
    pub fn read(&self, addr: u64) -> Result<(u8, Privilege), IsaError> {
        let page = self
            .pages
            .get(&Self::page_of(addr))
            .ok_or(IsaError::UnmappedAddress { addr })?;
        Ok((page.bytes[(addr % PAGE_SIZE) as usize], page.privilege))
    }

    /// Raw write ignoring privilege.
    pub fn write(&mut self, addr: u64, value: u8) -> Result<(), IsaError> {
        if !self.is_mapped(addr) {
            return Err(IsaError::UnmappedAddress { addr });
        }
        let pages = Arc::make_mut(&mut self.pages);
        let page = pages
            .get_mut(&Self::page_of(addr))
            .expect("page checked above");
        page.bytes[(addr % PAGE_SIZE) as usize] = value;
        Ok(())
    }

    /// Probability that a privileged byte is forwarded to transient
    /// execution, as last set by a co-running victim. `None` defers to the
    /// simulator configuration.
    pub fn residency(&self) -> Option<f64> {
        self.residency
    }

    pub fn set_residency(&mut self, residency: Option<f64>) {
        self.residency = residency;
    }

    /// Mapped pages as `(page index, privilege)`, in address order.
    pub fn page_tags(&self) -> impl Iterator<Item = (u64, Privilege)> + '_ {
        self.pages.iter().map(|(k, p)| (*k, p.privilege))
    }
}

#[derive(Debug, Default)]
pub struct MemoryBuilder {
    pages: BTreeMap<u64, Page>,
}

impl MemoryBuilder {
    pub fn new() -> MemoryBuilder {
        MemoryBuilder::default()
    }

    /// Maps every page overlapping `[addr, addr + len)` with `privilege`.
    /// Remapping an already mapped page replaces its tag.
    pub fn map(mut self, addr: u64, len: u64, privilege: Privilege) -> MemoryBuilder {
        let first = MemorySpace::page_of(addr);
        let last = MemorySpace::page_of(addr + len.max(1) - 1);
        for page in first..=last {
            self.pages
                .entry(page)
                .and_modify(|p| p.privilege = privilege)
                .or_insert_with(|| Page {
                    privilege,
                    bytes: vec![0; PAGE_SIZE as usize].into_boxed_slice(),
                });
        }
        self
    }

    /// Maps the pages covering `bytes` and stores them at `addr`.
    pub fn with_bytes(self, addr: u64, bytes: &[u8], privilege: Privilege) -> MemoryBuilder {
        let mut b = self.map(addr, bytes.len() as u64, privilege);
        for (i, &v) in bytes.iter().enumerate() {
            let a = addr + i as u64;
            let page = b.pages.get_mut(&MemorySpace::page_of(a)).unwrap();
            page.bytes[(a % PAGE_SIZE) as usize] = v;
        }
        b
    }

    pub fn build(self) -> MemorySpace {
        MemorySpace {
            pages: Arc::new(self.pages),
            residency: None,
        }
    }
}

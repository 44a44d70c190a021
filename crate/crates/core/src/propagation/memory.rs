use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor_store::{FeatureMap, SoftMask};

#[derive(Clone, Debug)]
pub struct MemoryEntry<T> {
    pub frame_index: u32,
    pub features: FeatureMap<T>,
    pub mask: SoftMask<T>,
    pinned: bool,
}

impl<T> MemoryEntry<T> {
    pub fn is_pinned(&self) -> bool {
        self.pinned
    }
}

/// Bounded store of past frames' features and soft masks.
///
/// Holds at most `capacity` entries. When `pin_first` is set the entry passed
/// to [`MemoryBank::init`] is never evicted; otherwise the oldest entry goes
/// first.
#[derive(Clone, Debug)]
pub struct MemoryBank<T> {
    capacity: usize,
    pin_first: bool,
    entries: VecDeque<MemoryEntry<T>>,
}

impl<T: Scalar> MemoryBank<T> {
    pub const DEFAULT_CAPACITY: usize = 8;

    pub fn new(capacity: usize, pin_first: bool) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument(
                "memory capacity must be >= 1".into(),
            ));
        }
        Ok(Self {
            capacity,
            pin_first,
            entries: VecDeque::with_capacity(capacity + 1),
        })
    }

    /// Clears the bank and seeds it with the annotated first frame.
    pub fn init(
        &mut self,
        frame_index: u32,
        features: FeatureMap<T>,
        mask: SoftMask<T>,
    ) -> Result<()> {
        check_alignment(&features, &mask)?;
        self.entries.clear();
        self.entries.push_back(MemoryEntry {
            frame_index,
            features,
            mask,
            pinned: self.pin_first,
        });
        Ok(())
    }

    /// Appends an entry, then evicts the oldest unpinned entry if over capacity.
    pub fn push(
        &mut self,
        frame_index: u32,
        features: FeatureMap<T>,
        mask: SoftMask<T>,
    ) -> Result<()> {
        check_alignment(&features, &mask)?;
        if let Some(first) = self.entries.front() {
            if !first.features.same_shape(&features) || first.mask.objs() != mask.objs() {
                return Err(Error::Dimension(format!(
                    "entry {}x{}x{} objs={} does not match bank {}x{}x{} objs={}",
                    features.channels(),
                    features.height(),
                    features.width(),
                    mask.objs(),
                    first.features.channels(),
                    first.features.height(),
                    first.features.width(),
                    first.mask.objs()
                )));
            }
        }
        self.entries.push_back(MemoryEntry {
            frame_index,
            features,
            mask,
            pinned: false,
        });
        while self.entries.len() > self.capacity {
            match self.entries.iter().position(|e| !e.pinned) {
                Some(i) => {
                    self.entries.remove(i);
                }
                None => break,
            }
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn pin_first(&self) -> bool {
        self.pin_first
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &MemoryEntry<T>> {
        self.entries.iter()
    }

    pub fn entry(&self, slot: usize) -> &MemoryEntry<T> {
        &self.entries[slot]
    }

    pub fn frame_indices(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.frame_index).collect()
    }

    pub fn objs(&self) -> Option<u8> {
        self.entries.front().map(|e| e.mask.objs())
    }
}

fn check_alignment<T: Scalar>(features: &FeatureMap<T>, mask: &SoftMask<T>) -> Result<()> {
    if features.height() != mask.height() || features.width() != mask.width() {
        return Err(Error::Dimension(format!(
            "mask {}x{} does not match feature grid {}x{}",
            mask.height(),
            mask.width(),
            features.height(),
            features.width()
        )));
    }
    Ok(())
}

//! Per-thread accounting of `Matrix` buffers.
//!
//! While a [`Tracker`] is alive on the current thread, every matrix allocation
//! and drop is counted. Used to check that the block-split forward never
//! materialises a full `m×n` intermediate.

use std::cell::RefCell;

#[derive(Debug, Default, Clone)]
struct State {
    live: usize,
    peak: usize,
    shapes: Vec<(usize, usize)>,
}

thread_local! {
    static STATE: RefCell<Option<State>> = const { RefCell::new(None) };
}

pub(crate) fn on_alloc(rows: usize, cols: usize) {
    STATE.with(|s| {
        if let Some(st) = s.borrow_mut().as_mut() {
            st.live += rows * cols;
            st.peak = st.peak.max(st.live);
            st.shapes.push((rows, cols));
        }
    });
}

pub(crate) fn on_free(rows: usize, cols: usize) {
    STATE.with(|s| {
        if let Some(st) = s.borrow_mut().as_mut() {
            // Buffers created before tracking started may be freed inside the window.
            st.live = st.live.saturating_sub(rows * cols);
        }
    });
}

/// Summary of what was allocated inside a tracking window.
#[derive(Debug, Clone)]
pub struct AllocReport {
    /// Peak number of live `f64` elements allocated within the window.
    pub peak_elements: usize,
    /// Shapes of every matrix created within the window, in order.
    pub shapes: Vec<(usize, usize)>,
}

impl AllocReport {
    pub fn allocated_shape(&self, rows: usize, cols: usize) -> bool {
        self.shapes.contains(&(rows, cols))
    }

    pub fn largest(&self) -> usize {
        self.shapes.iter().map(|(r, c)| r * c).max().unwrap_or(0)
    }
}

/// Guard that enables tracking on the current thread until dropped or finished.
pub struct Tracker {
    _private: (),
}

impl Tracker {
    pub fn start() -> Self {
        STATE.with(|s| *s.borrow_mut() = Some(State::default()));
        Tracker { _private: () }
    }

    pub fn finish(self) -> AllocReport {
        let st = STATE.with(|s| s.borrow_mut().take()).unwrap_or_default();
        AllocReport {
            peak_elements: st.peak,
            shapes: st.shapes,
        }
    }
}

impl Drop for Tracker {
    fn drop(&mut self) {
        STATE.with(|s| *s.borrow_mut() = None);
    }
}

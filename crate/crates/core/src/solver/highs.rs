//! HiGHS backend through its C API.

use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::time::Instant;

use highs_sys::*;

use super::{elapsed_secs, LinearBackend, RawHandle, RawSolution, SolveLimits, SolveStatus};
use crate::formulation::{Constraint, LinearModel, VarType};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct HighsBackend;

impl HighsBackend {
    pub fn version() -> String {
        // SAFETY: returns a pointer to a static NUL-terminated string.
        unsafe { CStr::from_ptr(Highs_version()) }.to_string_lossy().into_owned()
    }
}

impl LinearBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn load(&self, model: &LinearModel) -> Result<Box<dyn RawHandle>> {
        Ok(Box::new(HighsHandle::new(model)?))
    }
}

/// Improving-solution trace filled in by the MIP callback.
#[derive(Default)]
struct CallbackState {
    improvements: Vec<(f64, f64)>,
}

struct HighsHandle {
    ptr: *mut c_void,
    num_cols: usize,
    num_rows: usize,
    has_integers: bool,
    // Boxed so its address is stable for the C side.
    callback: Box<CallbackState>,
}

// SAFETY: the handle is only ever used from one thread at a time (`&mut self`
// on every mutating call); HiGHS instances carry no thread affinity.
unsafe impl Send for HighsHandle {}

impl Drop for HighsHandle {
    fn drop(&mut self) {
        // SAFETY: ptr came from Highs_create and is destroyed once.
        unsafe { Highs_destroy(self.ptr) };
    }
}

fn check(status: HighsInt, what: &str) -> Result<()> {
    if status == kHighsStatusError {
        Err(Error::Backend(format!("HiGHS call `{what}` failed")))
    } else {
        Ok(())
    }
}

fn to_highs_int(v: usize, what: &str) -> Result<HighsInt> {
    HighsInt::try_from(v).map_err(|_| Error::Backend(format!("{what} ({v}) exceeds the HiGHS index range")))
}

unsafe extern "C" fn on_callback(
    callback_type: c_int,
    _message: *const c_char,
    data_out: *const HighsCallbackDataOut,
    _data_in: *mut HighsCallbackDataIn,
    user_data: *mut c_void,
) {
    if callback_type != kHighsCallbackMipImprovingSolution || data_out.is_null() || user_data.is_null() {
        return;
    }
    // SAFETY: user_data is the boxed CallbackState owned by the handle that
    // is currently inside Highs_run; data_out is valid for this call.
    let state = &mut *(user_data as *mut CallbackState);
    let out = &*data_out;
    state.improvements.push((out.running_time, out.objective_function_value));
}

impl HighsHandle {
    fn new(model: &LinearModel) -> Result<Self> {
        // SAFETY: plain constructor.
        let ptr = unsafe { Highs_create() };
        if ptr.is_null() {
            return Err(Error::BackendUnavailable("highs (Highs_create returned null)".into()));
        }
        let mut handle = Self {
            ptr,
            num_cols: model.vars.len(),
            num_rows: model.constraints.len(),
            has_integers: model.num_integer() > 0,
            callback: Box::default(),
        };
        handle.set_bool("output_flag", false)?;
        handle.set_int("threads", 1)?;
        handle.set_int("random_seed", 0)?;
        handle.pass_model(model)?;
        let state: *mut CallbackState = &mut *handle.callback;
        // SAFETY: state outlives the Highs instance (dropped after it in Drop order
        // is irrelevant: the callback only fires inside Highs_run).
        unsafe {
            check(Highs_setCallback(ptr, Some(on_callback), state as *mut c_void), "setCallback")?;
            check(Highs_startCallback(ptr, kHighsCallbackMipImprovingSolution), "startCallback")?;
        }
        Ok(handle)
    }

    fn set_bool(&mut self, name: &str, v: bool) -> Result<()> {
        let c = CString::new(name).expect("option name");
        // SAFETY: valid handle and C string.
        check(unsafe { Highs_setBoolOptionValue(self.ptr, c.as_ptr(), v as HighsInt) }, name)
    }

    fn set_int(&mut self, name: &str, v: HighsInt) -> Result<()> {
        let c = CString::new(name).expect("option name");
        // SAFETY: valid handle and C string.
        check(unsafe { Highs_setIntOptionValue(self.ptr, c.as_ptr(), v) }, name)
    }

    fn set_double(&mut self, name: &str, v: f64) -> Result<()> {
        let c = CString::new(name).expect("option name");
        // SAFETY: valid handle and C string.
        check(unsafe { Highs_setDoubleOptionValue(self.ptr, c.as_ptr(), v) }, name)
    }

    fn info_double(&self, name: &str) -> Option<f64> {
        let c = CString::new(name).expect("info name");
        let mut v = 0.0;
        // SAFETY: valid handle, C string and out-pointer.
        let st = unsafe { Highs_getDoubleInfoValue(self.ptr, c.as_ptr(), &mut v) };
        (st == kHighsStatusOk).then_some(v)
    }

    fn info_int(&self, name: &str) -> Option<i64> {
        let c = CString::new(name).expect("info name");
        let mut v: HighsInt = 0;
        // SAFETY: as above.
        let st = unsafe { Highs_getIntInfoValue(self.ptr, c.as_ptr(), &mut v) };
        (st == kHighsStatusOk).then_some(v as i64)
    }

    fn info_int64(&self, name: &str) -> Option<i64> {
        let c = CString::new(name).expect("info name");
        let mut v: i64 = 0;
        // SAFETY: as above.
        let st = unsafe { Highs_getInt64InfoValue(self.ptr, c.as_ptr(), &mut v) };
        (st == kHighsStatusOk).then_some(v)
    }

    fn pass_model(&mut self, model: &LinearModel) -> Result<()> {
        let num_col = to_highs_int(model.vars.len(), "columns")?;
        let num_row = to_highs_int(model.constraints.len(), "rows")?;
        let cost: Vec<f64> = model.vars.iter().map(|v| v.cost).collect();
        let col_lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
        let col_upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
        let integrality: Vec<HighsInt> = model
            .vars
            .iter()
            .map(|v| match v.var_type {
                VarType::Binary => kHighsVarTypeInteger,
                VarType::Continuous => kHighsVarTypeContinuous,
            })
            .collect();
        let (row_lower, row_upper, starts, index, value) = rowwise(&model.constraints, model.vars.len())?;
        let num_nz = to_highs_int(index.len(), "nonzeros")?;
        // SAFETY: all arrays have the lengths HiGHS expects for a row-wise matrix.
        let st = unsafe {
            if self.has_integers {
                Highs_passMip(
                    self.ptr,
                    num_col,
                    num_row,
                    num_nz,
                    kHighsMatrixFormatRowwise,
                    kHighsObjSenseMinimize,
                    0.0,
                    cost.as_ptr(),
                    col_lower.as_ptr(),
                    col_upper.as_ptr(),
                    row_lower.as_ptr(),
                    row_upper.as_ptr(),
                    starts.as_ptr(),
                    index.as_ptr(),
                    value.as_ptr(),
                    integrality.as_ptr(),
                )
            } else {
                Highs_passLp(
                    self.ptr,
                    num_col,
                    num_row,
                    num_nz,
                    kHighsMatrixFormatRowwise,
                    kHighsObjSenseMinimize,
                    0.0,
                    cost.as_ptr(),
                    col_lower.as_ptr(),
                    col_upper.as_ptr(),
                    row_lower.as_ptr(),
                    row_upper.as_ptr(),
                    starts.as_ptr(),
                    index.as_ptr(),
                    value.as_ptr(),
                )
            }
        };
        if st == kHighsStatusError {
            return Err(Error::Backend(format!(
                "HiGHS rejected the model ({} columns, {} rows)",
                model.vars.len(),
                model.constraints.len()
            )));
        }
        Ok(())
    }
}

type RowwiseMatrix = (Vec<f64>, Vec<f64>, Vec<HighsInt>, Vec<HighsInt>, Vec<f64>);

fn rowwise(rows: &[Constraint], num_cols: usize) -> Result<RowwiseMatrix> {
    let mut lower = Vec::with_capacity(rows.len());
    let mut upper = Vec::with_capacity(rows.len());
    let mut starts = Vec::with_capacity(rows.len());
    let mut index = Vec::new();
    let mut value = Vec::new();
    for r in rows {
        lower.push(r.lower);
        upper.push(r.upper);
        starts.push(to_highs_int(index.len(), "nonzeros")?);
        for &(k, c) in &r.terms {
            if k >= num_cols {
                return Err(Error::Backend(format!("row `{}` references unknown column {k}", r.name)));
            }
            index.push(k as HighsInt);
            value.push(c);
        }
    }
    Ok((lower, upper, starts, index, value))
}

impl RawHandle for HighsHandle {
    fn num_cols(&self) -> usize {
        self.num_cols
    }

    fn num_rows(&self) -> usize {
        self.num_rows
    }

    fn set_start(&mut self, entries: &[(usize, f64)]) -> Result<()> {
        let idx: Vec<HighsInt> = entries.iter().map(|&(k, _)| k as HighsInt).collect();
        let val: Vec<f64> = entries.iter().map(|&(_, v)| v).collect();
        if entries.iter().any(|&(k, _)| k >= self.num_cols) {
            return Err(Error::Backend("start references an unknown column".into()));
        }
        // SAFETY: arrays of equal length `entries.len()`.
        let st = unsafe { Highs_setSparseSolution(self.ptr, idx.len() as HighsInt, idx.as_ptr(), val.as_ptr()) };
        check(st, "setSparseSolution")
    }

    fn clear_start(&mut self) {
        // SAFETY: valid handle; an empty sparse solution discards any stored start.
        unsafe { Highs_clearSolver(self.ptr) };
    }

    fn add_rows(&mut self, rows: &[Constraint]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let (lower, upper, starts, index, value) = rowwise(rows, self.num_cols)?;
        // SAFETY: row-wise arrays sized consistently.
        let st = unsafe {
            Highs_addRows(
                self.ptr,
                rows.len() as HighsInt,
                lower.as_ptr(),
                upper.as_ptr(),
                index.len() as HighsInt,
                starts.as_ptr(),
                index.as_ptr(),
                value.as_ptr(),
            )
        };
        check(st, "addRows")?;
        self.num_rows += rows.len();
        Ok(())
    }

    fn set_col_bounds(&mut self, cols: &[usize], lower: &[f64], upper: &[f64]) -> Result<()> {
        if cols.len() != lower.len() || cols.len() != upper.len() {
            return Err(Error::Backend("column bound arrays differ in length".into()));
        }
        if cols.iter().any(|&k| k >= self.num_cols) {
            return Err(Error::Backend("bound change references an unknown column".into()));
        }
        let set: Vec<HighsInt> = cols.iter().map(|&k| k as HighsInt).collect();
        // SAFETY: arrays of equal length.
        let st = unsafe { Highs_changeColsBoundsBySet(self.ptr, set.len() as HighsInt, set.as_ptr(), lower.as_ptr(), upper.as_ptr()) };
        check(st, "changeColsBoundsBySet")
    }

    fn solve(&mut self, limits: &SolveLimits) -> Result<RawSolution> {
        self.set_double("time_limit", limits.time_limit)?;
        self.set_double("mip_rel_gap", limits.gap_target)?;
        self.callback.improvements.clear();
        let started = Instant::now();
        // SAFETY: valid handle.
        let run = unsafe { Highs_run(self.ptr) };
        let wall_time = elapsed_secs(started.elapsed());
        if run == kHighsStatusError {
            // SAFETY: valid handle.
            let ms = unsafe { Highs_getModelStatus(self.ptr) };
            if ms != kHighsModelStatusTimeLimit && ms != kHighsModelStatusInterrupt {
                return Err(Error::Backend(format!("HiGHS run failed (model status {ms})")));
            }
        }
        // SAFETY: valid handle.
        let model_status = unsafe { Highs_getModelStatus(self.ptr) };
        let has_primal = self.info_int("primal_solution_status") == Some(kHighsSolutionStatusFeasible as i64);

        let status = match model_status {
            s if s == kHighsModelStatusOptimal => SolveStatus::Optimal,
            s if s == kHighsModelStatusInfeasible => SolveStatus::Infeasible,
            s if s == kHighsModelStatusUnbounded || s == kHighsModelStatusUnboundedOrInfeasible => {
                return Err(Error::Backend("model is unbounded".into()));
            }
            s if s == kHighsModelStatusModelEmpty => SolveStatus::Optimal,
            s if s == kHighsModelStatusLoadError
                || s == kHighsModelStatusModelError
                || s == kHighsModelStatusPresolveError
                || s == kHighsModelStatusSolveError
                || s == kHighsModelStatusPostsolveError =>
            {
                return Err(Error::Backend(format!("HiGHS reported model status {s}")));
            }
            _ if has_primal => SolveStatus::FeasibleLimit,
            _ => SolveStatus::NoSolution,
        };

        let values = if has_primal && status != SolveStatus::Infeasible {
            let mut col = vec![0.0; self.num_cols];
            let mut col_dual = vec![0.0; self.num_cols];
            let mut row = vec![0.0; self.num_rows];
            let mut row_dual = vec![0.0; self.num_rows];
            // SAFETY: buffers sized to the current model.
            let st =
                unsafe { Highs_getSolution(self.ptr, col.as_mut_ptr(), col_dual.as_mut_ptr(), row.as_mut_ptr(), row_dual.as_mut_ptr()) };
            check(st, "getSolution")?;
            Some(col)
        } else {
            None
        };

        let objective = if values.is_some() {
            // SAFETY: valid handle.
            unsafe { Highs_getObjectiveValue(self.ptr) }
        } else {
            f64::NAN
        };
        let (best_bound, gap, node_count) = if self.has_integers {
            let bound = self.info_double("mip_dual_bound").unwrap_or(f64::NEG_INFINITY);
            let gap = if values.is_some() { self.info_double("mip_gap").unwrap_or(f64::INFINITY) } else { f64::INFINITY };
            let nodes = self.info_int64("mip_node_count").unwrap_or(0).max(0) as u64;
            (bound, gap, nodes)
        } else if status == SolveStatus::Optimal {
            (objective, 0.0, 0)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY, 0)
        };

        Ok(RawSolution {
            status,
            objective,
            best_bound,
            gap,
            node_count,
            wall_time,
            values,
            improvements: std::mem::take(&mut self.callback.improvements),
        })
    }
}

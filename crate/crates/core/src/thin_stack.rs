//! The thin stack: every stack write lands in its own row of a `(T + 1) × 2D` matrix,
//! and a queue of row indices records which rows are currently live.
//!
//! Row 0 is a permanent zero pair. A REDUCE with fewer than two live rows pops row 0
//! for each missing child, and a SHIFT with an exhausted buffer pushes a zero pair, so
//! any action sequence runs to completion.

use std::fmt;

use crate::error::{Result, SpinnError};
use crate::tensor::{Float, Matrix};
use crate::transitions::Transition;

/// Where the contents of a stack row came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSource {
    /// A zero pair: padding, or a SHIFT on an empty buffer.
    Zero,
    /// Copied from this buffer slot.
    Buffer(usize),
    /// Composed from two earlier rows. `right` was the stack top.
    Compose { left: usize, right: usize },
}

/// Everything needed to replay one step backwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub t: usize,
    pub action: Transition,
    pub source: RowSource,
    /// `(second, top)` row indices live before the step; 0 stands for a missing entry.
    pub peek: (usize, usize),
    /// Buffer slots consumed before the step.
    pub cursor: usize,
    /// The action could not be executed literally and zero pairs were substituted.
    pub degenerate: bool,
}

/// A single example's stack.
#[derive(Clone, Debug)]
pub struct ThinStack {
    width: usize,
    steps: usize,
    rows: Vec<Float>,
    queue: Vec<usize>,
    t: usize,
    cursor: usize,
}

impl ThinStack {
    /// Storage for `steps` transitions over pairs of total width `width`.
    pub fn new(steps: usize, width: usize) -> Self {
        ThinStack {
            width,
            steps,
            rows: vec![0.0; (steps + 1) * width],
            queue: Vec::with_capacity(steps),
            t: 0,
            cursor: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Index of the last written row (0 before the first step).
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn depth(&self) -> usize {
        self.queue.len()
    }

    pub fn queue(&self) -> &[usize] {
        &self.queue
    }

    /// Buffer slots consumed so far.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn row(&self, i: usize) -> &[Float] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    /// Number of floats held, zero row included.
    pub fn storage_len(&self) -> usize {
        self.rows.len()
    }

    /// Row indices of the top two live entries as `(second, top)`, 0 where missing.
    pub fn peek_top2(&self) -> (usize, usize) {
        let n = self.queue.len();
        let top = if n >= 1 { self.queue[n - 1] } else { 0 };
        let second = if n >= 2 { self.queue[n - 2] } else { 0 };
        (second, top)
    }

    /// The pairs at [`Self::peek_top2`], as `(left, right)`.
    pub fn peek_pairs(&self) -> (&[Float], &[Float]) {
        let (l, r) = self.peek_top2();
        (self.row(l), self.row(r))
    }

    /// The current stack top, or the zero pair when empty.
    pub fn top(&self) -> &[Float] {
        self.row(self.peek_top2().1)
    }

    fn begin(&self, action: Transition, buffer_len: usize) -> Result<StepRecord> {
        if self.t >= self.steps {
            return Err(SpinnError::Internal(format!("thin stack has only {} steps", self.steps)));
        }
        Ok(StepRecord {
            t: self.t + 1,
            action,
            source: RowSource::Zero,
            peek: self.peek_top2(),
            cursor: self.cursor,
            degenerate: match action {
                Transition::Shift => self.cursor >= buffer_len,
                Transition::Reduce => self.queue.len() < 2,
                Transition::Pad => false,
            },
        })
    }

    /// Applies the bookkeeping for `record` (pops, cursor, push) without writing the row.
    fn commit(&mut self, record: &mut StepRecord) {
        match record.action {
            Transition::Shift => {
                if !record.degenerate {
                    record.source = RowSource::Buffer(self.cursor);
                    self.cursor += 1;
                }
            }
            Transition::Reduce => {
                let right = self.queue.pop().unwrap_or(0);
                let left = self.queue.pop().unwrap_or(0);
                record.source = RowSource::Compose { left, right };
            }
            Transition::Pad => {}
        }
        self.t = record.t;
        self.queue.push(record.t);
    }

    fn write(&mut self, t: usize, values: &[Float]) {
        self.rows[t * self.width..(t + 1) * self.width].copy_from_slice(values);
    }

    /// One step of the algorithm. `buffer` holds `n × width` projected words and
    /// `composer(left, right, out)` writes the parent pair.
    pub fn step<C>(&mut self, action: Transition, buffer: &[Float], composer: &mut C) -> Result<StepRecord>
    where
        C: FnMut(&[Float], &[Float], &mut [Float]),
    {
        if !buffer.len().is_multiple_of(self.width) {
            return Err(SpinnError::dims("thin stack buffer", (1, buffer.len()), (1, self.width)));
        }
        let mut record = self.begin(action, buffer.len() / self.width)?;
        self.commit(&mut record);
        let w = self.width;
        match record.source {
            RowSource::Zero => {}
            RowSource::Buffer(i) => {
                let src = buffer[i * w..(i + 1) * w].to_vec();
                self.write(record.t, &src);
            }
            RowSource::Compose { left, right } => {
                let mut out = vec![0.0; w];
                composer(self.row(left), self.row(right), &mut out);
                self.write(record.t, &out);
            }
        }
        Ok(record)
    }
}

/// Result of [`run_sequence`].
#[derive(Clone, Debug)]
pub struct ThinRun {
    pub stack: ThinStack,
    pub records: Vec<StepRecord>,
    /// Queue contents after each step.
    pub queues: Vec<Vec<usize>>,
}

impl ThinRun {
    /// The final stack top.
    pub fn output(&self) -> &[Float] {
        self.stack.top()
    }
}

/// Runs a whole sequence from the empty stack over `buffer` (`n × width`).
pub fn run_sequence<C>(buffer: &[Float], width: usize, seq: &[Transition], mut composer: C) -> Result<ThinRun>
where
    C: FnMut(&[Float], &[Float], &mut [Float]),
{
    let mut stack = ThinStack::new(seq.len(), width);
    let mut records = Vec::with_capacity(seq.len());
    let mut queues = Vec::with_capacity(seq.len());
    for &a in seq {
        records.push(stack.step(a, buffer, &mut composer)?);
        queues.push(stack.queue().to_vec());
    }
    Ok(ThinRun { stack, records, queues })
}

/// Reverse pass over a [`ThinRun`].
///
/// `d_rows` starts as the upstream gradient on every row (`(T + 1) × width`, usually
/// just the final top). `compose_backward(step, d_out, d_left, d_right)` must add the
/// child gradients for the REDUCE at record index `step`. Returns the gradient for
/// each buffer slot.
pub fn backprop_sequence<G>(
    records: &[StepRecord],
    width: usize,
    buffer_len: usize,
    d_rows: &mut [Float],
    mut compose_backward: G,
) -> Result<Vec<Float>>
where
    G: FnMut(usize, &[Float], &mut [Float], &mut [Float]),
{
    if d_rows.len() != (records.len() + 1) * width {
        return Err(SpinnError::Internal(format!(
            "gradient holds {} floats for a {}-step trace",
            d_rows.len(),
            records.len()
        )));
    }
    let mut d_buffer = vec![0.0; buffer_len * width];
    let mut d_left = vec![0.0; width];
    let mut d_right = vec![0.0; width];
    for (k, rec) in records.iter().enumerate().rev() {
        if rec.t != k + 1 {
            return Err(SpinnError::Internal(format!("record {k} claims step {}", rec.t)));
        }
        let d_out = d_rows[rec.t * width..(rec.t + 1) * width].to_vec();
        match rec.source {
            RowSource::Zero => {}
            RowSource::Buffer(i) => {
                if i >= buffer_len {
                    return Err(SpinnError::Internal(format!("step {} reads buffer slot {i}", rec.t)));
                }
                for (d, g) in d_buffer[i * width..(i + 1) * width].iter_mut().zip(&d_out) {
                    *d += g;
                }
            }
            RowSource::Compose { left, right } => {
                d_left.fill(0.0);
                d_right.fill(0.0);
                compose_backward(k, &d_out, &mut d_left, &mut d_right);
                add_row(d_rows, left, width, &d_left);
                add_row(d_rows, right, width, &d_right);
            }
        }
    }
    Ok(d_buffer)
}

fn add_row(d_rows: &mut [Float], row: usize, width: usize, g: &[Float]) {
    if row == 0 {
        return;
    }
    for (d, x) in d_rows[row * width..(row + 1) * width].iter_mut().zip(g) {
        *d += x;
    }
}

/// Per-step outcome of [`BatchedThinStack::step`].
#[derive(Clone, Debug, Default)]
pub struct BatchStep {
    pub records: Vec<StepRecord>,
    /// Lanes that composed this step, in ascending order.
    pub reduce_lanes: Vec<usize>,
}

/// One thin stack per lane, advanced in lockstep.
#[derive(Clone, Debug)]
pub struct BatchedThinStack {
    lanes: Vec<ThinStack>,
    compose_calls: usize,
}

impl BatchedThinStack {
    pub fn new(lanes: usize, steps: usize, width: usize) -> Self {
        BatchedThinStack { lanes: vec![ThinStack::new(steps, width); lanes], compose_calls: 0 }
    }

    pub fn lanes(&self) -> &[ThinStack] {
        &self.lanes
    }

    pub fn lane(&self, b: usize) -> &ThinStack {
        &self.lanes[b]
    }

    /// Number of batched composer invocations so far.
    pub fn compose_calls(&self) -> usize {
        self.compose_calls
    }

    /// Total floats of row storage across lanes.
    pub fn storage_len(&self) -> usize {
        self.lanes.iter().map(ThinStack::storage_len).sum()
    }

    /// Advances every lane by one action.
    ///
    /// `buffers[b]` is lane `b`'s `n_b × width` buffer. All REDUCE lanes are composed
    /// in one call `composer(left, right, lanes)`, which receives the stacked child
    /// rows and returns the parents in the same order.
    pub fn step<C>(&mut self, actions: &[Transition], buffers: &[&[Float]], composer: &mut C) -> Result<BatchStep>
    where
        C: FnMut(&Matrix, &Matrix, &[usize]) -> Result<Matrix>,
    {
        if actions.len() != self.lanes.len() || buffers.len() != self.lanes.len() {
            return Err(SpinnError::Internal(format!(
                "{} lanes given {} actions and {} buffers",
                self.lanes.len(),
                actions.len(),
                buffers.len()
            )));
        }
        let Some(first) = self.lanes.first() else {
            return Ok(BatchStep::default());
        };
        let (t, width) = (first.t, first.width);
        if self.lanes.iter().any(|l| l.t != t) {
            return Err(SpinnError::Internal("lanes are at different timesteps".into()));
        }
        let mut out = BatchStep { records: Vec::with_capacity(actions.len()), reduce_lanes: Vec::new() };
        for (b, lane) in self.lanes.iter_mut().enumerate() {
            let buf = buffers[b];
            let mut rec = lane.begin(actions[b], buf.len() / width)?;
            lane.commit(&mut rec);
            match rec.source {
                RowSource::Buffer(i) => lane.write(rec.t, &buf[i * width..(i + 1) * width]),
                RowSource::Compose { .. } => out.reduce_lanes.push(b),
                RowSource::Zero => {}
            }
            out.records.push(rec);
        }
        if !out.reduce_lanes.is_empty() {
            let k = out.reduce_lanes.len();
            let mut left = Matrix::zeros(k, width);
            let mut right = Matrix::zeros(k, width);
            for (j, &b) in out.reduce_lanes.iter().enumerate() {
                let RowSource::Compose { left: l, right: r } = out.records[b].source else { unreachable!() };
                left.row_mut(j).copy_from_slice(self.lanes[b].row(l));
                right.row_mut(j).copy_from_slice(self.lanes[b].row(r));
            }
            let parents = composer(&left, &right, &out.reduce_lanes)?;
            if parents.shape() != (k, width) {
                return Err(SpinnError::dims("batched compose", parents.shape(), (k, width)));
            }
            self.compose_calls += 1;
            for (j, &b) in out.reduce_lanes.iter().enumerate() {
                let t = out.records[b].t;
                self.lanes[b].write(t, parents.row(j));
            }
        }
        Ok(out)
    }
}

/// Renders a run as one line per step: `t`, action, the row written and the queue.
/// `labels` names the buffer slots.
pub fn format_trace(run: &ThinRun, labels: &[String]) -> String {
    let mut row_labels: Vec<String> = vec!["0".to_string(); run.records.len() + 1];
    let mut out = String::new();
    out.push_str(&format!("{:>3}  {:<7}{:<28}{}\n", "t", "a", "S[t]", "Q"));
    for (rec, q) in run.records.iter().zip(&run.queues) {
        let label = match rec.source {
            RowSource::Zero => "0".to_string(),
            RowSource::Buffer(i) => labels.get(i).cloned().unwrap_or_else(|| format!("#{i}")),
            RowSource::Compose { left, right } => format!("({} {})", row_labels[left], row_labels[right]),
        };
        row_labels[rec.t] = label.clone();
        let queue = q.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        let mut line = format!("{:>3}  {:<7}{:<28}{}", rec.t, rec.action.name(), label, queue);
        if rec.degenerate {
            line.push_str(match rec.action {
                Transition::Reduce => "  [degenerate pop: zero substituted]",
                _ => "  [empty buffer: zero shifted]",
            });
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

impl fmt::Display for RowSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSource::Zero => write!(f, "zero"),
            RowSource::Buffer(i) => write!(f, "buffer[{i}]"),
            RowSource::Compose { left, right } => write!(f, "compose({left}, {right})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transitions::parse_transitions;

    fn concat(l: &[Float], r: &[Float], out: &mut [Float]) {
        for i in 0..out.len() {
            out[i] = l[i] * 0.5 + r[i] + 1.0;
        }
    }

    #[test]
    fn spot_sat_down_queue_evolution() {
        let buffer: Vec<Float> = vec![1.0, 2.0, 3.0];
        let seq = parse_transitions("S S S R R").unwrap();
        let run = run_sequence(&buffer, 1, &seq, concat).unwrap();
        assert_eq!(run.queues, vec![vec![1], vec![1, 2], vec![1, 2, 3], vec![1, 4], vec![5]]);
        assert_eq!(run.records[3].source, RowSource::Compose { left: 2, right: 3 });
        assert_eq!(run.records[4].source, RowSource::Compose { left: 1, right: 4 });
        let labels: Vec<String> = ["Spot", "sat", "down"].iter().map(|s| s.to_string()).collect();
        let trace = format_trace(&run, &labels);
        assert!(trace.lines().last().unwrap().contains("(Spot (sat down))"), "{trace}");
    }

    #[test]
    fn peek_on_short_queues() {
        let mut s = ThinStack::new(3, 2);
        assert_eq!(s.peek_top2(), (0, 0));
        s.step(Transition::Shift, &[4.0, 5.0], &mut concat).unwrap();
        assert_eq!(s.peek_top2(), (0, 1));
        assert_eq!(s.peek_pairs(), (&[0.0, 0.0][..], &[4.0, 5.0][..]));
    }

    #[test]
    fn degenerate_steps_substitute_zero() {
        let mut s = ThinStack::new(3, 1);
        let rec = s.step(Transition::Reduce, &[], &mut concat).unwrap();
        assert!(rec.degenerate);
        assert_eq!(rec.source, RowSource::Compose { left: 0, right: 0 });
        assert_eq!(s.row(1), &[1.0]);
        let rec = s.step(Transition::Shift, &[], &mut concat).unwrap();
        assert!(rec.degenerate && rec.source == RowSource::Zero);
        assert_eq!(s.queue(), &[1, 2]);
        assert!(s.step(Transition::Pad, &[], &mut concat).is_ok());
        assert!(s.step(Transition::Pad, &[], &mut concat).is_err());
    }

    #[test]
    fn single_shift_passes_gradient_through() {
        let run = run_sequence(&[0.3, -0.2], 2, &[Transition::Shift], concat).unwrap();
        let mut d = vec![0.0, 0.0, 1.5, -2.0];
        let g = backprop_sequence(&run.records, 2, 1, &mut d, |_, _, _, _| unreachable!()).unwrap();
        assert_eq!(g, vec![1.5, -2.0]);
    }

    #[test]
    fn batched_all_shift_step_never_composes() {
        let mut b = BatchedThinStack::new(3, 2, 1);
        let bufs: Vec<&[Float]> = vec![&[1.0], &[2.0], &[3.0]];
        let mut calls = 0;
        let mut composer = |l: &Matrix, _: &Matrix, _: &[usize]| {
            calls += 1;
            Ok(l.clone())
        };
        let step = b.step(&[Transition::Shift; 3], &bufs, &mut composer).unwrap();
        assert!(step.reduce_lanes.is_empty());
        assert_eq!(calls, 0);
        assert_eq!(b.compose_calls(), 0);
        assert_eq!(b.lane(2).row(1), &[3.0]);
    }
}

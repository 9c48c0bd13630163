//! Typed row batches with filter and aggregate kernels, plus a compact
//! binary row codec used when tables live in files.

use std::cmp::Ordering;

use crate::error::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int64,
    Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bytes(Vec<u8>),
}

impl Value {
    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int64,
            Value::Bytes(_) => ColumnType::Bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<(String, ColumnType)>,
}

impl Schema {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = (S, ColumnType)>) -> Self {
        Schema { columns: columns.into_iter().map(|(n, t)| (n.into(), t)).collect() }
    }

    pub fn index_of(&self, name: &str) -> Result<(usize, ColumnType), KernelError> {
        self.columns
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| (i, self.columns[i].1))
            .ok_or_else(|| KernelError::UnknownColumn(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowBatch {
    pub schema: Schema,
    pub rows: Vec<Vec<Value>>,
}

impl RowBatch {
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self, KernelError> {
        let batch = RowBatch { schema, rows };
        batch.check()?;
        Ok(batch)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check(&self) -> Result<(), KernelError> {
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.schema.columns.len() {
                return Err(KernelError::Malformed(format!("row {r} has {} values", row.len())));
            }
            for (v, (name, ty)) in row.iter().zip(&self.schema.columns) {
                if v.column_type() != *ty {
                    return Err(KernelError::Malformed(format!("row {r} column `{name}` has the wrong type")));
                }
            }
        }
        Ok(())
    }

    /// Size used for cost accounting: 8 bytes per integer plus the length of
    /// each byte string.
    pub fn cost_bytes(&self) -> u64 {
        self.rows
            .iter()
            .flatten()
            .map(|v| match v {
                Value::Int(_) => 8,
                Value::Bytes(b) => b.len() as u64,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    True,
    Cmp { column: String, op: CmpOp, value: Value },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn cmp(column: impl Into<String>, op: CmpOp, value: Value) -> Self {
        Predicate::Cmp { column: column.into(), op, value }
    }

    pub fn and(self, other: Predicate) -> Self {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Predicate) -> Self {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Self {
        Predicate::Not(Box::new(self))
    }
}

enum Bound {
    True,
    Cmp(usize, CmpOp, Value),
    And(Box<Bound>, Box<Bound>),
    Or(Box<Bound>, Box<Bound>),
    Not(Box<Bound>),
}

fn bind(p: &Predicate, schema: &Schema) -> Result<Bound, KernelError> {
    Ok(match p {
        Predicate::True => Bound::True,
        Predicate::Cmp { column, op, value } => {
            let (idx, ty) = schema.index_of(column)?;
            if value.column_type() != ty {
                return Err(KernelError::TypeMismatch(format!("column `{column}` compared with a {:?} literal", value.column_type())));
            }
            Bound::Cmp(idx, *op, value.clone())
        }
        Predicate::And(a, b) => Bound::And(Box::new(bind(a, schema)?), Box::new(bind(b, schema)?)),
        Predicate::Or(a, b) => Bound::Or(Box::new(bind(a, schema)?), Box::new(bind(b, schema)?)),
        Predicate::Not(a) => Bound::Not(Box::new(bind(a, schema)?)),
    })
}

impl Bound {
    fn eval(&self, row: &[Value]) -> bool {
        match self {
            Bound::True => true,
            Bound::Cmp(i, op, v) => op.holds(row[*i].cmp(v)),
            Bound::And(a, b) => a.eval(row) && b.eval(row),
            Bound::Or(a, b) => a.eval(row) || b.eval(row),
            Bound::Not(a) => !a.eval(row),
        }
    }
}

/// Checks that `pred` is well-typed against `schema` without evaluating it.
pub fn check_predicate(pred: &Predicate, schema: &Schema) -> Result<(), KernelError> {
    bind(pred, schema).map(|_| ())
}

pub fn filter(batch: &RowBatch, pred: &Predicate) -> Result<RowBatch, KernelError> {
    batch.check()?;
    let bound = bind(pred, &batch.schema)?;
    Ok(RowBatch {
        schema: batch.schema.clone(),
        rows: batch.rows.iter().filter(|r| bound.eval(r)).cloned().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Sum,
    Count,
    Min,
    Max,
}

impl AggFn {
    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Sum => "sum",
            AggFn::Count => "count",
            AggFn::Min => "min",
            AggFn::Max => "max",
        }
    }
}

/// `count` accepts any column type; the others need an int64 column.
/// Over an empty batch: count and sum are 0, min and max are an error.
/// Sums wrap on overflow.
pub fn aggregate(batch: &RowBatch, func: AggFn, column: &str) -> Result<i64, KernelError> {
    batch.check()?;
    let (idx, ty) = batch.schema.index_of(column)?;
    if func == AggFn::Count {
        return Ok(batch.rows.len() as i64);
    }
    if ty != ColumnType::Int64 {
        return Err(KernelError::TypeMismatch(format!("{} over bytes column `{column}`", func.as_str())));
    }
    let ints = batch.rows.iter().map(|r| match r[idx] {
        Value::Int(v) => v,
        Value::Bytes(_) => unreachable!("batch checked"),
    });
    match func {
        AggFn::Sum => Ok(ints.fold(0i64, |a, v| a.wrapping_add(v))),
        AggFn::Min => ints.min().ok_or(KernelError::EmptyAggregate("min")),
        AggFn::Max => ints.max().ok_or(KernelError::EmptyAggregate("max")),
        AggFn::Count => unreachable!(),
    }
}

// Layout: u16 column count, then per column (u8 type, u16 name len, name);
// u32 row count, then values (i64, or u32 len + bytes). All little-endian.
pub fn encode_rows(batch: &RowBatch) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(batch.schema.columns.len() as u16).to_le_bytes());
    for (name, ty) in &batch.schema.columns {
        out.push(match ty {
            ColumnType::Int64 => 0,
            ColumnType::Bytes => 1,
        });
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&(batch.rows.len() as u32).to_le_bytes());
    for v in batch.rows.iter().flatten() {
        match v {
            Value::Int(i) => out.extend_from_slice(&i.to_le_bytes()),
            Value::Bytes(b) => {
                out.extend_from_slice(&(b.len() as u32).to_le_bytes());
                out.extend_from_slice(b);
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], KernelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| KernelError::Malformed(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, KernelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, KernelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_rows(buf: &[u8]) -> Result<RowBatch, KernelError> {
    let mut r = Reader { buf, pos: 0 };
    let ncols = r.u16()? as usize;
    let mut columns = Vec::with_capacity(ncols);
    for _ in 0..ncols {
        let ty = match r.take(1)?[0] {
            0 => ColumnType::Int64,
            1 => ColumnType::Bytes,
            t => return Err(KernelError::Malformed(format!("column type tag {t}"))),
        };
        let len = r.u16()? as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| KernelError::Malformed("column name is not utf-8".into()))?;
        columns.push((name, ty));
    }
    let nrows = r.u32()? as usize;
    let mut rows = Vec::with_capacity(nrows.min(1 << 20));
    for _ in 0..nrows {
        let mut row = Vec::with_capacity(ncols);
        for (_, ty) in &columns {
            row.push(match ty {
                ColumnType::Int64 => Value::Int(i64::from_le_bytes(r.take(8)?.try_into().unwrap())),
                ColumnType::Bytes => {
                    let len = r.u32()? as usize;
                    Value::Bytes(r.take(len)?.to_vec())
                }
            });
        }
        rows.push(row);
    }
    if r.pos != buf.len() {
        return Err(KernelError::Malformed(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(RowBatch { schema: Schema { columns }, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(vals: &[i64]) -> RowBatch {
        RowBatch::new(Schema::new([("col0", ColumnType::Int64)]), vals.iter().map(|v| vec![Value::Int(*v)]).collect()).unwrap()
    }

    #[test]
    fn true_predicate_is_identity() {
        let b = ints(&[4, 2, 9]);
        assert_eq!(filter(&b, &Predicate::True).unwrap(), b);
    }

    #[test]
    fn filter_then_sum() {
        let kept = filter(&ints(&[1, 7, 9, 3]), &Predicate::cmp("col0", CmpOp::Gt, Value::Int(5))).unwrap();
        assert_eq!(aggregate(&kept, AggFn::Sum, "col0").unwrap(), 16);
    }

    #[test]
    fn empty_batch_rules() {
        let e = ints(&[]);
        assert_eq!(aggregate(&e, AggFn::Count, "col0").unwrap(), 0);
        assert_eq!(aggregate(&e, AggFn::Sum, "col0").unwrap(), 0);
        assert_eq!(aggregate(&e, AggFn::Min, "col0"), Err(KernelError::EmptyAggregate("min")));
        assert_eq!(aggregate(&e, AggFn::Max, "col0"), Err(KernelError::EmptyAggregate("max")));
    }

    #[test]
    fn errors() {
        let b = ints(&[1]);
        assert!(matches!(filter(&b, &Predicate::cmp("nope", CmpOp::Eq, Value::Int(1))), Err(KernelError::UnknownColumn(_))));
        assert!(matches!(
            filter(&b, &Predicate::cmp("col0", CmpOp::Eq, Value::Bytes(vec![1]))),
            Err(KernelError::TypeMismatch(_))
        ));
        let s = RowBatch::new(Schema::new([("name", ColumnType::Bytes)]), vec![vec![Value::Bytes(b"x".to_vec())]]).unwrap();
        assert!(matches!(aggregate(&s, AggFn::Max, "name"), Err(KernelError::TypeMismatch(_))));
        assert_eq!(aggregate(&s, AggFn::Count, "name").unwrap(), 1);
    }

    #[test]
    fn compound_predicates_against_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let schema = Schema::new([("a", ColumnType::Int64), ("b", ColumnType::Bytes)]);
        let rows: Vec<Vec<Value>> = (0..500)
            .map(|_| vec![Value::Int(rng.gen_range(-50..50)), Value::Bytes(vec![rng.gen_range(b'a'..=b'e')])])
            .collect();
        let batch = RowBatch::new(schema, rows).unwrap();
        let p = Predicate::cmp("a", CmpOp::Ge, Value::Int(-10))
            .and(Predicate::cmp("a", CmpOp::Lt, Value::Int(20)))
            .or(Predicate::cmp("b", CmpOp::Eq, Value::Bytes(b"c".to_vec())).negate().negate());
        let got = filter(&batch, &p).unwrap();
        let want: Vec<_> = batch
            .rows
            .iter()
            .filter(|r| {
                let Value::Int(a) = r[0] else { unreachable!() };
                (-10..20).contains(&a) || r[1] == Value::Bytes(b"c".to_vec())
            })
            .cloned()
            .collect();
        assert_eq!(got.rows, want);
        assert_eq!(decode_rows(&encode_rows(&batch)).unwrap(), batch);
    }

    #[test]
    fn truncated_rows_rejected() {
        let enc = encode_rows(&ints(&[1, 2, 3]));
        assert!(decode_rows(&enc[..enc.len() - 1]).is_err());
    }
}

//! Factor tuple enumeration.

/// All ordered `slots`-tuples of positive integers whose product is `bound`,
/// in lexicographic order.
pub fn enumerate_factorizations(bound: u64, slots: usize) -> Vec<Vec<u64>> {
    assert!(bound >= 1 && slots >= 1, "bound and slots must be positive");
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(slots);
    rec(bound, slots, &mut cur, &mut out);
    out
}

fn rec(rest: u64, slots: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if slots == 1 {
        cur.push(rest);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for d in divisors(rest) {
        cur.push(d);
        rec(rest / d, slots - 1, cur, out);
        cur.pop();
    }
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n.is_multiple_of(i) {
            small.push(i);
            if i * i != n {
                large.push(n / i);
            }
        }
        i += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Tuples for padded mapping. `spatial[i]` gives the fanout limit of slot
/// `i` if it is spatial. For every choice of spatial factors (each within
/// its limit, product `s`) the temporal slots factor `ceil(bound / s)`, so
/// the padded bound `ceil(bound / s) * s` is the smallest one that choice
/// admits. Choices where `s` divides `bound` give the strict tuples.
pub fn enumerate_padded(bound: u64, spatial: &[Option<u64>]) -> Vec<Vec<u64>> {
    assert!(bound >= 1 && !spatial.is_empty(), "bound and slots must be positive");
    let sp_idx: Vec<usize> = (0..spatial.len()).filter(|&i| spatial[i].is_some()).collect();
    let tm_idx: Vec<usize> = (0..spatial.len()).filter(|&i| spatial[i].is_none()).collect();
    let mut sp_choices: Vec<Vec<u64>> = vec![vec![]];
    for &i in &sp_idx {
        let lim = spatial[i].unwrap().max(1);
        sp_choices = sp_choices
            .into_iter()
            .flat_map(|c| {
                (1..=lim).map(move |v| {
                    let mut c = c.clone();
                    c.push(v);
                    c
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for sc in sp_choices {
        let s: u64 = sc.iter().product();
        let t = bound.div_ceil(s);
        let temporal = if tm_idx.is_empty() {
            if t != 1 {
                continue;
            }
            vec![vec![]]
        } else {
            enumerate_factorizations(t, tm_idx.len())
        };
        for tc in temporal {
            let mut v = vec![0; spatial.len()];
            for (k, &i) in sp_idx.iter().enumerate() {
                v[i] = sc[k];
            }
            for (k, &i) in tm_idx.iter().enumerate() {
                v[i] = tc[k];
            }
            out.push(v);
        }
    }
    out.sort();
    out
}

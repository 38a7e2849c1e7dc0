//! Exact Kolmogorov thresholds `θ(α, m)`, stored as printed.

pub const ALPHAS: [&str; 10] = [
    "0.00001", "0.00005", "0.0001", "0.0005", "0.001", "0.005", "0.01", "0.05", "0.1", "0.5",
];

pub const BATCH_SIZES: [usize; 13] = [1, 3, 5, 10, 30, 50, 100, 300, 500, 1000, 3000, 5000, 10000];

/// `THRESHOLDS[i][j]` is the threshold for `ALPHAS[i]` and `BATCH_SIZES[j]`.
pub const THRESHOLDS: [[&str; 13]; 10] = [
    [
        "0.99999500066", "0.982894897461", "0.912933349609", "0.717041015625", "0.436859130859",
        "0.342071533203", "0.243988037109", "0.141807556152", "0.110023498535",
        "0.077911376953", "0.045040130615", "0.034900665283", "0.024686813354",
    ],
    [
        "0.999974995852", "0.970764160156", "0.8798828125", "0.674682617188", "0.407958984375",
        "0.319091796875", "0.227416992188", "0.132125854492", "0.102508544922",
        "0.07258605957", "0.041961669922", "0.032516479492", "0.023000717163",
    ],
    [
        "0.999949991703", "0.963165283203", "0.861999511719", "0.65478515625", "0.394775390625",
        "0.308624267578", "0.219879150391", "0.127731323242", "0.099098205566",
        "0.070171356201", "0.040565490723", "0.031433105469", "0.022235870361",
    ],
    [
        "0.999750137329", "0.93701171875", "0.809631347656", "0.604309082031", "0.361938476562",
        "0.282653808594", "0.201263427734", "0.116882324219", "0.090675354004",
        "0.064208984375", "0.037120819092", "0.028762817383", "0.020347595215",
    ],
    [
        "0.999500274658", "0.920654296875", "0.781372070312", "0.580444335938", "0.346740722656",
        "0.270690917969", "0.192687988281", "0.111877441406", "0.086791992188",
        "0.061462402344", "0.035533905029", "0.027534484863", "0.019477844238",
    ],
    [
        "0.997497558594", "0.8642578125", "0.705444335938", "0.518737792969", "0.308166503906",
        "0.240386962891", "0.171051025391", "0.099304199219", "0.077041625977",
        "0.054557800293", "0.031539916992", "0.024444580078", "0.017292022705",
    ],
    [
        "0.994995117188", "0.828979492188", "0.668579101562", "0.488891601562", "0.289855957031",
        "0.226043701172", "0.160797119141", "0.093353271484", "0.07243347168",
        "0.051292419434", "0.02965927124", "0.022983551025", "0.016258239746",
    ],
    [
        "0.974975585938", "0.70751953125", "0.563232421875", "0.409240722656", "0.24169921875",
        "0.188415527344", "0.134033203125", "0.077835083008", "0.060394287109",
        "0.042778015137", "0.024742126465", "0.019172668457", "0.013565063477",
    ],
    [
        "0.949951171875", "0.635986328125", "0.509521484375", "0.36865234375", "0.217529296875",
        "0.169616699219", "0.120666503906", "0.070098876953", "0.054397583008",
        "0.038528442383", "0.022285461426", "0.017272949219", "0.012222290039",
    ],
    [
        "0.75", "0.4345703125", "0.341796875", "0.246826171875", "0.145874023438",
        "0.113891601562", "0.081176757812", "0.047241210938", "0.036682128906",
        "0.026000976562", "0.01505279541", "0.011672973633", "0.00825881958",
    ],
];

/// One row of the threshold table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub alpha: f64,
    pub m: usize,
    pub theta: f64,
    /// The value exactly as printed.
    pub printed: &'static str,
}

pub fn entries() -> impl Iterator<Item = TableEntry> {
    ALPHAS.iter().enumerate().flat_map(|(i, a)| {
        let alpha: f64 = a.parse().expect("table alpha");
        BATCH_SIZES.iter().enumerate().map(move |(j, &m)| {
            let printed = THRESHOLDS[i][j];
            TableEntry {
                alpha,
                m,
                theta: printed.parse().expect("table theta"),
                printed,
            }
        })
    })
}

/// Exact-match lookup; `alpha` must equal one of the tabulated levels.
pub fn lookup(alpha: f64, m: usize) -> Option<TableEntry> {
    let i = ALPHAS
        .iter()
        .position(|a| a.parse::<f64>().is_ok_and(|x| x == alpha))?;
    let j = BATCH_SIZES.iter().position(|&b| b == m)?;
    let printed = THRESHOLDS[i][j];
    Some(TableEntry {
        alpha,
        m,
        theta: printed.parse().ok()?,
        printed,
    })
}

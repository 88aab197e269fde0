#![no_main]

use libfuzzer_sys::fuzz_target;
use masr_cli::report::{read_table, table_string, Format};
use masr_cli::runner::RunRow;

fuzz_target!(|data: &[u8]| {
    let Some((&tag, body)) = data.split_first() else { return };
    let format = if tag & 1 == 0 { Format::Csv } else { Format::Json };
    if let Ok(rows) = read_table::<RunRow, _>(format, body) {
        let text = table_string(&rows, format);
        let back: Vec<RunRow> = read_table(format, text.as_bytes()).unwrap();
        assert_eq!(back.len(), rows.len());
    }
});

//! Holds the `acceptance` test target. It sits in its own package, which cargo runs after the
//! library and CLI suites, so a failing criterion does not hide their results.

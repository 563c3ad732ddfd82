//! Export of results (to come).

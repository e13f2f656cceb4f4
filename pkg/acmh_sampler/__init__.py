"""acmh_sampler: adaptive correlated Metropolis-Hastings with reversible t-mixture proposals."""

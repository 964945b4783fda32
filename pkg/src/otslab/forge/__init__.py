"""The generic black-box forger, its transcript samplers and variants."""

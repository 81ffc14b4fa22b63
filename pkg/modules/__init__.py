# Expansion toolkit library: state vectors, gates, schemes, analysis

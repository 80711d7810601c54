# Jitter stability tooling
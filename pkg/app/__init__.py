# Tether-Aware Planner

# Deep RL Life-Cycle Maintenance Planner - Main Package

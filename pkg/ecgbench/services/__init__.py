"""Run services: data, training, metrics, cost model, reports and pipelines"""

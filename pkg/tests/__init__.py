"""Test suite for Data Ingestion and Validation Pipeline"""
